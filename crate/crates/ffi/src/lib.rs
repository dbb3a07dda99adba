//! C ABI over `mobius_knot`.
//!
//! Curves and flow traces are opaque heap handles released with their
//! `_free` function. Every entry point returns an [`MkStatus`]; on failure
//! [`mk_last_error_message`] describes the error. Results are written
//! through out-pointers, and arrays go into caller-owned buffers whose
//! capacity (in doubles) is passed alongside.
//!
//! Panics never cross the boundary; they surface as `MK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mobius_knot::flow::{self, FlowConfig, FlowTrace, Metric, StopReason};
use mobius_knot::minkowski::{self, MinkVector};
use mobius_knot::moebius::{self, MoebiusMap, SphereInversion};
use mobius_knot::{conformal, energy, io, Error, PolyCurve};
use nalgebra::{DMatrix, Vector3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numeric = 5,
    FlowAbort = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Values for the `formula` argument of [`mk_energy`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkFormula {
    Renormalized = 0,
    Cosine = 1,
    Sphere = 2,
    Open = 3,
}

/// Values for [`MkFlowConfig::metric`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkMetric {
    L2 = 0,
    Sobolev = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStopReason {
    Converged = 0,
    MaxSteps = 1,
    Stalled = 2,
    Aborted = 3,
    Interrupted = 4,
}

/// Opaque polygonal curve.
pub struct MkCurve(PolyCurve);

/// Opaque result of a flow run.
pub struct MkFlowTrace(FlowTrace);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MkCrossRatio {
    pub abs_density: f64,
    pub theta: f64,
    pub re_density: f64,
    pub im_density: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MkFlowConfig {
    pub alpha: f64,
    pub step_init: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub resample_every: usize,
    pub min_self_dist_factor: f64,
    /// One of the [`MkMetric`] values.
    pub metric: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MkStepRecord {
    pub step: usize,
    pub energy: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    pub min_self_dist: f64,
    pub resampled: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(MkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) => MkStatus::Parse,
            Error::Io(_) => MkStatus::Io,
            Error::FlowAbort { .. } => MkStatus::FlowAbort,
            Error::InvalidParameter(_)
            | Error::InvalidAlpha(_)
            | Error::IndexOutOfRange { .. }
            | Error::SameIndex(..)
            | Error::DimensionMismatch { .. }
            | Error::Closedness { .. }
            | Error::TooFewVertices { .. } => MkStatus::InvalidArgument,
            _ => MkStatus::Numeric,
        };
        Fail(status, e.to_string())
    }
}

type FfiResult = std::result::Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> MkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MkStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            MkStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn fill(out: *mut f64, cap: usize, values: &[f64]) -> FfiResult {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if cap < values.len() {
        return Err(Fail(
            MkStatus::BufferTooSmall,
            format!("buffer holds {cap} doubles, {} needed", values.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn hand_out(out: *mut *mut MkCurve, c: PolyCurve) -> FfiResult {
    write(out, Box::into_raw(Box::new(MkCurve(c))), "curve out-pointer")
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failing call on this thread, or "" after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a curve from `n` vertices stored as `3n` doubles (x, y, z).
///
/// # Safety
/// `coords` must point to `3 * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_new(coords: *const f64, n: usize, closed: bool, out: *mut *mut MkCurve) -> MkStatus {
    guard(|| {
        let xs = slice(coords, n.checked_mul(3).ok_or_else(|| Fail(MkStatus::InvalidArgument, "n too large".into()))?, "coords")?;
        let verts = xs.chunks_exact(3).map(|v| Vector3::new(v[0], v[1], v[2])).collect();
        hand_out(out, PolyCurve::new(verts, closed)?)
    })
}

/// Reads a knot file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_read_file(path: *const c_char, out: *mut *mut MkCurve) -> MkStatus {
    guard(|| hand_out(out, io::read_knot(Path::new(string(path, "path")?))?))
}

/// Builds a curve from a generator spec such as `gen:trefoil:n=256`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_generate(spec: *const c_char, out: *mut *mut MkCurve) -> MkStatus {
    guard(|| {
        let spec = string(spec, "spec")?;
        if !spec.starts_with("gen:") {
            return Err(Fail(MkStatus::InvalidArgument, format!("'{spec}' is not a gen: spec")));
        }
        hand_out(out, io::load_curve(spec)?)
    })
}

/// Releases a curve. Null is ignored.
///
/// # Safety
/// `c` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_free(c: *mut MkCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_len(c: *const MkCurve, out: *mut usize) -> MkStatus {
    guard(|| write(out, deref(c, "curve")?.0.len(), "out"))
}

/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_is_closed(c: *const MkCurve, out: *mut bool) -> MkStatus {
    guard(|| write(out, deref(c, "curve")?.0.is_closed(), "out"))
}

/// Copies the vertices as `3n` doubles into `out`.
///
/// # Safety
/// `out` must have room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_vertices(c: *const MkCurve, out: *mut f64, cap: usize) -> MkStatus {
    guard(|| {
        let flat: Vec<f64> = deref(c, "curve")?.0.vertices().iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        fill(out, cap, &flat)
    })
}

/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_total_length(c: *const MkCurve, out: *mut f64) -> MkStatus {
    guard(|| write(out, deref(c, "curve")?.0.total_length(), "out"))
}

/// New curve with `n` vertices at equal chord spacing.
///
/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_curve_resample(c: *const MkCurve, n: usize, out: *mut *mut MkCurve) -> MkStatus {
    guard(|| hand_out(out, deref(c, "curve")?.0.resample_uniform(n)?))
}

/// Energy of a curve; `formula` is one of the [`MkFormula`] values.
/// `Cosine` and `Open` need `alpha = 2`; `Sphere`
/// lifts the curve to the unit 3-sphere first.
///
/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_energy(c: *const MkCurve, alpha: f64, formula: u32, out: *mut f64) -> MkStatus {
    guard(|| {
        let c = &deref(c, "curve")?.0;
        let formula = match formula {
            0 => MkFormula::Renormalized,
            1 => MkFormula::Cosine,
            2 => MkFormula::Sphere,
            3 => MkFormula::Open,
            f => return Err(Fail(MkStatus::InvalidArgument, format!("unknown formula {f}"))),
        };
        if matches!(formula, MkFormula::Cosine | MkFormula::Open) && alpha != 2.0 {
            return Err(Fail(MkStatus::InvalidArgument, "formula needs alpha = 2".into()));
        }
        let report = match formula {
            MkFormula::Renormalized => energy::energy_alpha(c, alpha)?,
            MkFormula::Cosine => energy::energy_cosine(c)?,
            MkFormula::Open => energy::energy_open(c)?,
            MkFormula::Sphere => energy::energy_sphere(&moebius::lift_curve_to_sphere(c)?, alpha)?,
        };
        write(out, report.value, "out")
    })
}

/// Cross term between two disjoint closed curves.
///
/// # Safety
/// `a`, `b` must be live curve handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_cross_energy(a: *const MkCurve, b: *const MkCurve, out: *mut f64) -> MkStatus {
    guard(|| {
        let r = energy::cross_energy(&deref(a, "curve a")?.0, &deref(b, "curve b")?.0)?;
        write(out, r.value, "out")
    })
}

/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_conformal_angle(c: *const MkCurve, i: usize, j: usize, out: *mut f64) -> MkStatus {
    guard(|| write(out, conformal::conformal_angle(&deref(c, "curve")?.0, i, j)?, "out"))
}

/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_cross_ratio_sample(c: *const MkCurve, i: usize, j: usize, out: *mut MkCrossRatio) -> MkStatus {
    guard(|| {
        let s = conformal::cross_ratio_sample(&deref(c, "curve")?.0, i, j)?;
        let v = MkCrossRatio {
            abs_density: s.abs_density,
            theta: s.theta,
            re_density: s.re_density,
            im_density: s.im_density,
        };
        write(out, v, "out")
    })
}

/// Image of a curve under inversion in the sphere with centre
/// (cx, cy, cz) and radius r.
///
/// # Safety
/// `c` must be a live curve handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_invert_curve(
    c: *const MkCurve,
    cx: f64,
    cy: f64,
    cz: f64,
    r: f64,
    out: *mut *mut MkCurve,
) -> MkStatus {
    guard(|| {
        let inv = SphereInversion::new(Vector3::new(cx, cy, cz), r)?;
        hand_out(out, moebius::apply_map(&MoebiusMap::new(vec![inv]), &deref(c, "curve")?.0)?)
    })
}

/// dE/dv for every vertex, `3n` doubles.
///
/// # Safety
/// `out` must have room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_gradient(c: *const MkCurve, alpha: f64, out: *mut f64, cap: usize) -> MkStatus {
    guard(|| {
        let g = flow::discrete_gradient(&deref(c, "curve")?.0, alpha)?;
        let flat: Vec<f64> = g.vertex.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        fill(out, cap, &flat)
    })
}

/// Default flow settings.
#[no_mangle]
pub extern "C" fn mk_flow_config_default() -> MkFlowConfig {
    let d = FlowConfig::default();
    MkFlowConfig {
        alpha: d.alpha,
        step_init: d.step_init,
        max_steps: d.max_steps,
        grad_tol: d.grad_tol,
        resample_every: d.resample_every,
        min_self_dist_factor: d.min_self_dist_factor,
        metric: match d.metric {
            Metric::L2 => MkMetric::L2 as u32,
            Metric::Sobolev => MkMetric::Sobolev as u32,
        },
    }
}

/// Runs the flow. On an abort the trace is still handed out and the call
/// returns `MK_STATUS_FLOW_ABORT`.
///
/// # Safety
/// `c` must be a live curve handle, `cfg` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_relax(c: *const MkCurve, cfg: *const MkFlowConfig, out: *mut *mut MkFlowTrace) -> MkStatus {
    guard(|| {
        let c = &deref(c, "curve")?.0;
        let k = deref(cfg, "config")?;
        if out.is_null() {
            return Err(null("trace out-pointer"));
        }
        let cfg = FlowConfig {
            alpha: k.alpha,
            step_init: k.step_init,
            max_steps: k.max_steps,
            grad_tol: k.grad_tol,
            resample_every: k.resample_every,
            min_self_dist_factor: k.min_self_dist_factor,
            metric: match k.metric {
                0 => Metric::L2,
                1 => Metric::Sobolev,
                m => return Err(Fail(MkStatus::InvalidArgument, format!("unknown metric {m}"))),
            },
        };
        let trace = flow::relax(c, &cfg)?;
        let abort = trace.abort_error();
        out.write(Box::into_raw(Box::new(MkFlowTrace(trace))));
        match abort {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `t` must come from [`mk_relax`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_trace_free(t: *mut MkFlowTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of step records, including the initial state.
///
/// # Safety
/// `t` must be a live trace; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_trace_len(t: *const MkFlowTrace, out: *mut usize) -> MkStatus {
    guard(|| write(out, deref(t, "trace")?.0.records.len(), "out"))
}

/// # Safety
/// `t` must be a live trace; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_trace_record(t: *const MkFlowTrace, k: usize, out: *mut MkStepRecord) -> MkStatus {
    guard(|| {
        let recs = &deref(t, "trace")?.0.records;
        let r = recs.get(k).ok_or_else(|| Fail(MkStatus::InvalidArgument, format!("record {k} of {}", recs.len())))?;
        let v = MkStepRecord {
            step: r.step,
            energy: r.energy,
            step_size: r.step_size,
            grad_norm: r.grad_norm,
            min_self_dist: r.min_self_dist,
            resampled: r.resampled,
        };
        write(out, v, "out")
    })
}

/// # Safety
/// `t` must be a live trace; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_trace_stop(t: *const MkFlowTrace, out: *mut MkStopReason) -> MkStatus {
    guard(|| {
        let s = match deref(t, "trace")?.0.stop {
            StopReason::Converged => MkStopReason::Converged,
            StopReason::MaxSteps => MkStopReason::MaxSteps,
            StopReason::Stalled => MkStopReason::Stalled,
            StopReason::Aborted => MkStopReason::Aborted,
            StopReason::Interrupted => MkStopReason::Interrupted,
        };
        write(out, s, "out")
    })
}

/// Copy of the final curve of a trace, as a new handle.
///
/// # Safety
/// `t` must be a live trace; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_trace_curve(t: *const MkFlowTrace, out: *mut *mut MkCurve) -> MkStatus {
    guard(|| hand_out(out, deref(t, "trace")?.0.curve.clone()))
}

/// Minkowski inner product of two `dim`-vectors, time coordinate first.
///
/// # Safety
/// `u`, `v` must hold `dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_mink_inner(u: *const f64, v: *const f64, dim: usize, out: *mut f64) -> MkStatus {
    guard(|| {
        let a = MinkVector::new(slice(u, dim, "u")?.to_vec());
        let b = MinkVector::new(slice(v, dim, "v")?.to_vec());
        write(out, minkowski::mink_inner(&a, &b)?, "out")
    })
}

/// Number of coordinates of a `k`-blade in dimension `dim`.
#[no_mangle]
pub extern "C" fn mk_blade_len(dim: usize, k: usize) -> usize {
    if k > dim {
        0
    } else {
        minkowski::binomial(dim, k)
    }
}

/// Wedge of `k` vectors of dimension `dim`, given row-major, into
/// `mk_blade_len(dim, k)` coordinates in lexicographic multi-index order.
///
/// # Safety
/// `vectors` must hold `k * dim` doubles; `out` room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_wedge(vectors: *const f64, k: usize, dim: usize, out: *mut f64, cap: usize) -> MkStatus {
    guard(|| {
        let len = k.checked_mul(dim).ok_or_else(|| Fail(MkStatus::InvalidArgument, "size overflow".into()))?;
        let rows: Vec<MinkVector> = slice(vectors, len, "vectors")?
            .chunks_exact(dim.max(1))
            .map(|r| MinkVector::new(r.to_vec()))
            .collect();
        fill(out, cap, &minkowski::wedge(&rows)?.coords)
    })
}

/// Matrix of (q+2)-minors of a `dim`×`dim` row-major matrix, written
/// row-major; it is `m`×`m` with `m = mk_blade_len(dim, q + 2)`.
///
/// # Safety
/// `a` must hold `dim * dim` doubles; `out` room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_psi_matrix(a: *const f64, dim: usize, q: usize, out: *mut f64, cap: usize) -> MkStatus {
    guard(|| {
        if dim < 2 {
            return Err(Fail(MkStatus::InvalidArgument, "dimension must be at least 2".into()));
        }
        let m = DMatrix::from_row_slice(dim, dim, slice(a, dim * dim, "matrix")?);
        let psi = minkowski::psi_matrix(&m, q, dim - 2)?;
        let flat: Vec<f64> = psi.transpose().iter().copied().collect();
        fill(out, cap, &flat)
    })
}
