use std::ffi::{CStr, CString};
use std::ptr;

use mobius_knot_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mk_last_error_message()) }.to_string_lossy().into_owned()
}

fn generate(spec: &str) -> *mut MkCurve {
    let spec = CString::new(spec).unwrap();
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { mk_curve_generate(spec.as_ptr(), &mut c) }, MkStatus::Ok);
    assert!(!c.is_null());
    c
}

fn regular_polygon(n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            [t.cos(), t.sin(), 0.0]
        })
        .collect()
}

#[test]
fn curve_round_trip_through_handles() {
    let coords = regular_polygon(64);
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(mk_curve_new(coords.as_ptr(), 64, true, &mut c), MkStatus::Ok);
        let mut n = 0;
        assert_eq!(mk_curve_len(c, &mut n), MkStatus::Ok);
        assert_eq!(n, 64);
        let mut closed = false;
        assert_eq!(mk_curve_is_closed(c, &mut closed), MkStatus::Ok);
        assert!(closed);
        let mut back = vec![0.0; 3 * 64];
        assert_eq!(mk_curve_vertices(c, back.as_mut_ptr(), back.len()), MkStatus::Ok);
        assert_eq!(back, coords);
        assert_eq!(mk_curve_vertices(c, back.as_mut_ptr(), 10), MkStatus::BufferTooSmall);
        assert!(last_error().contains("192"));
        let mut len = 0.0;
        assert_eq!(mk_curve_total_length(c, &mut len), MkStatus::Ok);
        assert!((len - 128.0 * (std::f64::consts::PI / 64.0).sin()).abs() < 1e-12);
        let mut r = ptr::null_mut();
        assert_eq!(mk_curve_resample(c, 32, &mut r), MkStatus::Ok);
        assert_eq!(mk_curve_len(r, &mut n), MkStatus::Ok);
        assert_eq!(n, 32);
        mk_curve_free(r);
        mk_curve_free(c);
    }
}

#[test]
fn energies_match_the_library() {
    let c = generate("gen:trefoil:n=256");
    let core = mobius_knot::io::load_curve("gen:trefoil:n=256").unwrap();
    unsafe {
        let mut e = 0.0;
        assert_eq!(mk_energy(c, 2.0, MkFormula::Renormalized as u32, &mut e), MkStatus::Ok);
        assert_eq!(e, mobius_knot::energy::energy_alpha(&core, 2.0).unwrap().value);
        let mut cos = 0.0;
        assert_eq!(mk_energy(c, 2.0, MkFormula::Cosine as u32, &mut cos), MkStatus::Ok);
        assert!((cos - e).abs() < 1e-2 * e);
        assert_eq!(mk_energy(c, 1.5, MkFormula::Cosine as u32, &mut cos), MkStatus::InvalidArgument);
        assert_eq!(mk_energy(c, 2.0, 99, &mut cos), MkStatus::InvalidArgument);
        assert_eq!(mk_energy(c, 3.5, MkFormula::Renormalized as u32, &mut cos), MkStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));

        let mut inv = ptr::null_mut();
        assert_eq!(mk_invert_curve(c, 0.5, 0.3, 1.5, 2.0, &mut inv), MkStatus::Ok);
        let mut ei = 0.0;
        assert_eq!(mk_energy(inv, 2.0, MkFormula::Renormalized as u32, &mut ei), MkStatus::Ok);
        assert!((ei - e).abs() < 1e-2 * e);
        mk_curve_free(inv);

        let mut theta = 0.0;
        assert_eq!(mk_conformal_angle(c, 3, 100, &mut theta), MkStatus::Ok);
        let mut s = MkCrossRatio::default();
        assert_eq!(mk_cross_ratio_sample(c, 3, 100, &mut s), MkStatus::Ok);
        assert_eq!(s.theta, theta);
        assert!(s.im_density >= 0.0);
        assert_eq!(mk_conformal_angle(c, 3, 3, &mut theta), MkStatus::InvalidArgument);
        mk_curve_free(c);
    }
}

#[test]
fn cross_energy_of_hopf_components() {
    let a = regular_polygon(64);
    let b: Vec<f64> = regular_polygon(64).chunks(3).flat_map(|v| [1.0 + v[0], 0.0, v[1]]).collect();
    unsafe {
        let (mut ca, mut cb) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(mk_curve_new(a.as_ptr(), 64, true, &mut ca), MkStatus::Ok);
        assert_eq!(mk_curve_new(b.as_ptr(), 64, true, &mut cb), MkStatus::Ok);
        let (mut ab, mut ba) = (0.0, 0.0);
        assert_eq!(mk_cross_energy(ca, cb, &mut ab), MkStatus::Ok);
        assert_eq!(mk_cross_energy(cb, ca, &mut ba), MkStatus::Ok);
        assert!(ab > 0.0);
        assert_eq!(ab, ba);
        mk_curve_free(ca);
        mk_curve_free(cb);
    }
}

#[test]
fn gradient_and_flow() {
    let c = generate("gen:perturbed:n=64,seed=2,amp=0.3");
    unsafe {
        let mut g = vec![0.0; 3 * 64];
        assert_eq!(mk_gradient(c, 2.0, g.as_mut_ptr(), g.len()), MkStatus::Ok);
        for axis in 0..3 {
            let s: f64 = g.iter().skip(axis).step_by(3).sum();
            assert!(s.abs() < 1e-9);
        }
        let mut cfg = mk_flow_config_default();
        cfg.max_steps = 40;
        let mut t = ptr::null_mut();
        assert_eq!(mk_relax(c, &cfg, &mut t), MkStatus::Ok);
        let mut len = 0;
        assert_eq!(mk_trace_len(t, &mut len), MkStatus::Ok);
        assert_eq!(len, 41);
        let (mut first, mut last) = (MkStepRecord::default(), MkStepRecord::default());
        assert_eq!(mk_trace_record(t, 0, &mut first), MkStatus::Ok);
        assert_eq!(mk_trace_record(t, len - 1, &mut last), MkStatus::Ok);
        assert!(last.energy < first.energy);
        assert_eq!(mk_trace_record(t, len, &mut last), MkStatus::InvalidArgument);
        let mut stop = MkStopReason::Converged;
        assert_eq!(mk_trace_stop(t, &mut stop), MkStatus::Ok);
        assert_eq!(stop, MkStopReason::MaxSteps);
        let mut fin = ptr::null_mut();
        assert_eq!(mk_trace_curve(t, &mut fin), MkStatus::Ok);
        mk_curve_free(fin);
        mk_trace_free(t);

        cfg.metric = 7;
        assert_eq!(mk_relax(c, &cfg, &mut t), MkStatus::InvalidArgument);
        mk_curve_free(c);
    }
}

#[test]
fn flow_abort_still_hands_out_the_trace() {
    let c = generate("gen:clasp:n=128,gap=0.0001");
    unsafe {
        let cfg = mk_flow_config_default();
        let mut t = ptr::null_mut();
        assert_eq!(mk_relax(c, &cfg, &mut t), MkStatus::FlowAbort);
        assert!(!t.is_null());
        let mut stop = MkStopReason::Converged;
        assert_eq!(mk_trace_stop(t, &mut stop), MkStatus::Ok);
        assert_eq!(stop, MkStopReason::Aborted);
        assert!(last_error().is_empty());
        mk_trace_free(t);
        mk_curve_free(c);
    }
}

#[test]
fn minkowski_entry_points() {
    let e0 = [1.0, 0.0, 0.0, 0.0, 0.0];
    let e1 = [0.0, 1.0, 0.0, 0.0, 0.0];
    unsafe {
        let mut ip = 0.0;
        assert_eq!(mk_mink_inner(e0.as_ptr(), e0.as_ptr(), 5, &mut ip), MkStatus::Ok);
        assert_eq!(ip, -1.0);
        assert_eq!(mk_mink_inner(e1.as_ptr(), e1.as_ptr(), 5, &mut ip), MkStatus::Ok);
        assert_eq!(ip, 1.0);

        assert_eq!(mk_blade_len(5, 2), 10);
        let rows = [e0, e1].concat();
        let mut blade = vec![0.0; 10];
        assert_eq!(mk_wedge(rows.as_ptr(), 2, 5, blade.as_mut_ptr(), 10), MkStatus::Ok);
        assert_eq!(blade[0], 1.0);
        assert!(blade[1..].iter().all(|&x| x == 0.0));

        let id: Vec<f64> = (0..25).map(|k| if k % 6 == 0 { 1.0 } else { 0.0 }).collect();
        let mut psi = vec![0.0; 100];
        assert_eq!(mk_psi_matrix(id.as_ptr(), 5, 0, psi.as_mut_ptr(), 100), MkStatus::Ok);
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(psi[r * 10 + c], if r == c { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(mk_psi_matrix(id.as_ptr(), 5, 0, psi.as_mut_ptr(), 99), MkStatus::BufferTooSmall);
    }
}

#[test]
fn null_and_bad_inputs_are_reported() {
    unsafe {
        let mut n = 0;
        assert_eq!(mk_curve_len(ptr::null(), &mut n), MkStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut c = ptr::null_mut();
        assert_eq!(mk_curve_new(ptr::null(), 8, true, &mut c), MkStatus::NullPointer);
        let dup = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(mk_curve_new(dup.as_ptr(), 3, false, &mut c), MkStatus::Numeric);
        let path = CString::new("/nonexistent/x.knot").unwrap();
        assert_eq!(mk_curve_read_file(path.as_ptr(), &mut c), MkStatus::Io);
        let spec = CString::new("trefoil").unwrap();
        assert_eq!(mk_curve_generate(spec.as_ptr(), &mut c), MkStatus::InvalidArgument);
        mk_curve_free(ptr::null_mut());
        mk_trace_free(ptr::null_mut());
    }
}

#[test]
fn read_file_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.knot");
    std::fs::write(&path, "closed\n1,0,0\n0,1\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(mk_curve_read_file(p.as_ptr(), &mut c), MkStatus::Parse);
    }
    assert!(last_error().contains(":3:"), "{}", last_error());
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(mk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
