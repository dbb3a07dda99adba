//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use mobius_knot::conformal::{conformal_angle, cross_ratio_grid, cross_ratio_sample, energy_from_grid};
use mobius_knot::energy::{energy_alpha, energy_cosine};
use mobius_knot::flow::{circle_fit_residual, discrete_gradient, relax, FlowConfig, StopReason};
use mobius_knot::minkowski::{
    apply_psi, blade_inner, plucker_residual, psi_g, psi_matrix, pseudo_orthogonality_residual,
    random_lorentz, s_partials, wedge, MinkVector,
};
use mobius_knot::moebius::{apply_map, light_cone_lift, MoebiusMap, SphereInversion};
use mobius_knot::symplectic::{canonical_form_pullback, exactness_integral, parametric_pullback};
use mobius_knot::{generators, PolyCurve};
use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn trefoil(n: usize) -> PolyCurve {
    generators::torus_knot(n, 2, 3).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn circle_zero_point() -> Outcome {
    let c256 = generators::circle(256, 1.0).unwrap();
    let t0 = Instant::now();
    let e256 = energy_alpha(&c256, 2.0).unwrap().value;
    let took = t0.elapsed();
    let e512 = energy_alpha(&generators::circle(512, 1.0).unwrap(), 2.0).unwrap().value;
    let ok = e256.abs() <= 5e-3 && e512.abs() <= 0.5 * e256.abs() && took < Duration::from_secs(1);
    (ok, format!("E(256) = {e256:.3e}, E(512) = {e512:.3e}, {took:.2?}"))
}

fn moebius_invariance() -> Outcome {
    let m = MoebiusMap::new(vec![SphereInversion::new(Vector3::new(0.5, 0.3, 1.5), 2.0).unwrap()]);
    let ratio = |n| {
        let c = trefoil(n);
        let e = energy_alpha(&c, 2.0).unwrap().value;
        let f = energy_alpha(&apply_map(&m, &c).unwrap(), 2.0).unwrap().value;
        rel(f, e)
    };
    let (r512, r1024) = (ratio(512), ratio(1024));
    (r512 <= 1e-2 && r1024 < r512, format!("n=512 {r512:.2e}, n=1024 {r1024:.2e}"))
}

fn test_curves(n: usize) -> [(&'static str, PolyCurve); 2] {
    [("trefoil", trefoil(n)), ("ellipse", generators::ellipse(n, 2.0, 1.0).unwrap())]
}

fn cosine_equivalence() -> Outcome {
    let err = |c: &PolyCurve| {
        let e = energy_alpha(c, 2.0).unwrap().value;
        rel(energy_cosine(c).unwrap().value, e)
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for ((name, a), (_, b)) in test_curves(256).iter().zip(test_curves(512).iter()) {
        let (ea, eb) = (err(a), err(b));
        ok &= ea <= 1e-2 && eb < ea;
        detail.push(format!("{name} {ea:.2e} -> {eb:.2e}"));
    }
    (ok, detail.join(", "))
}

fn cross_ratio_identity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, c) in test_curves(256) {
        let e = energy_alpha(&c, 2.0).unwrap().value;
        let g = energy_from_grid(&c, &cross_ratio_grid(&c, 1).unwrap());
        let r = rel(g, e);
        ok &= r <= 1e-2;
        detail.push(format!("{name} {r:.2e}"));
    }
    (ok, detail.join(", "))
}

/// Pairs (k·64, l·64) of a 2048-vertex trefoil, skipping the diagonal.
/// The partials are taken on its lift to S³.
fn lifted_grid() -> (PolyCurve, Vec<(usize, usize)>) {
    let c = trefoil(2048);
    let pairs = (0..32)
        .flat_map(|k| (0..32).map(move |l| (k * 64, l * 64)))
        .filter(|(i, j)| i != j)
        .collect();
    (c, pairs)
}

fn signed_area_and_lightlike() -> (Outcome, Outcome) {
    let (c, pairs) = lifted_grid();
    let mut area_worst: f64 = 0.0;
    let mut light_worst: f64 = 0.0;
    for &(i, j) in &pairs {
        let (sx, sy) = s_partials(&c, i, j).unwrap();
        let cr = cross_ratio_sample(&c, i, j).unwrap();
        let area = blade_inner(&sx, &sy).unwrap();
        area_worst = area_worst.max((2.0 * cr.re_density - area).abs() / cr.abs_density);
        for s in [&sx, &sy] {
            let scale: f64 = s.coords.iter().map(|v| v * v).sum();
            light_worst = light_worst.max(blade_inner(s, s).unwrap().abs() / scale);
        }
    }
    (
        (area_worst <= 1e-3, format!("{} pairs, worst {area_worst:.2e} of |Ω|", pairs.len())),
        (light_worst <= 1e-6, format!("{} pairs, worst {light_worst:.2e}", pairs.len())),
    )
}

fn link_exactness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, link) in [
        ("hopf", generators::hopf_link(256).unwrap()),
        ("torus(2,4)", generators::torus_link_2_4(256).unwrap()),
    ] {
        let r = exactness_integral(&link).unwrap();
        ok &= r.signed.abs() <= 1e-2 * r.absolute;
        detail.push(format!("{name} {:.2e}", r.ratio()));
    }
    (ok, detail.join(", "))
}

fn random_vec(dim: usize, rng: &mut impl Rng) -> MinkVector {
    MinkVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn plucker_lorentz_algebra() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut plucker, mut hom, mut pseudo, mut equiv): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (q, n) in [(0, 3), (1, 3), (2, 3)] {
        for _ in 0..1000 {
            let vs: Vec<_> = (0..q + 2).map(|_| random_vec(n + 2, &mut rng)).collect();
            plucker = plucker.max(plucker_residual(&wedge(&vs).unwrap()));
        }
        for _ in 0..100 {
            let a = random_lorentz(n + 2, &mut rng);
            let b = random_lorentz(n + 2, &mut rng);
            let lhs = psi_matrix(&(&a * &b), q, n).unwrap();
            let rhs = psi_matrix(&a, q, n).unwrap() * psi_matrix(&b, q, n).unwrap();
            hom = hom.max((lhs - rhs).amax());
            pseudo = pseudo.max(pseudo_orthogonality_residual(&psi_matrix(&a, q, n).unwrap(), q, n));
        }
    }
    for _ in 0..100 {
        let a = random_lorentz(5, &mut rng);
        let vs: Vec<_> = (0..2)
            .map(|_| {
                let p = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
                light_cone_lift(&p).unwrap()
            })
            .collect();
        let moved: Vec<_> = vs.iter().map(|v| v.apply(&a).unwrap()).collect();
        let lhs = psi_g(&moved).unwrap().blade;
        let rhs = apply_psi(&psi_matrix(&a, 0, 3).unwrap(), &psi_g(&vs).unwrap().blade).unwrap();
        for (x, y) in lhs.coords.iter().zip(&rhs.coords) {
            equiv = equiv.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    let took = t0.elapsed();
    let ok = plucker <= 1e-10 && hom <= 1e-10 && pseudo <= 1e-10 && equiv <= 1e-9 && took < Duration::from_secs(10);
    (
        ok,
        format!("plucker {plucker:.1e}, hom {hom:.1e}, pseudo {pseudo:.1e}, psi_g {equiv:.1e}, {took:.2?}"),
    )
}

fn lift_plane(a: f64, b: f64) -> Vector3<f64> {
    let r2 = a * a + b * b;
    Vector3::new(2.0 * a, 2.0 * b, r2 - 1.0) / (r2 + 1.0)
}

/// Re(w'z'/(w − z)²) for two plane curves against the pulled-back form on S².
fn planar_identity_error() -> f64 {
    let w = |s: f64| (1.2 * s.cos() + 0.3, 0.8 * s.sin() - 0.1);
    let z = |t: f64| (0.5 * t.cos() - 1.0, 2.0 * t.sin() + 0.4);
    let dw = |s: f64| (-1.2 * s.sin(), 0.8 * s.cos());
    let dz = |t: f64| (-0.5 * t.sin(), 2.0 * t.cos());
    let mut worst: f64 = 0.0;
    for (s, t) in [(0.3, 1.1), (2.0, 4.0), (5.0, 0.5), (1.0, 2.5), (3.5, 5.9)] {
        let (wv, zv, ws, zt) = (w(s), z(t), dw(s), dz(t));
        let d = (wv.0 - zv.0, wv.1 - zv.1);
        let d2 = (d.0 * d.0 - d.1 * d.1, 2.0 * d.0 * d.1);
        let num = (ws.0 * zt.0 - ws.1 * zt.1, ws.0 * zt.1 + ws.1 * zt.0);
        let re = (num.0 * d2.0 + num.1 * d2.1) / (d2.0 * d2.0 + d2.1 * d2.1);
        let omega = parametric_pullback(|u| { let p = w(u); lift_plane(p.0, p.1) }, |u| { let p = z(u); lift_plane(p.0, p.1) }, s, t, 1e-3, None).unwrap();
        worst = worst.max((-0.5 * omega - re).abs());
    }
    worst
}

fn symplectic_pullback() -> Outcome {
    let planar = planar_identity_error();
    let c = trefoil(1024);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let (i, j): (usize, usize) = (rng.random_range(0..1024), rng.random_range(0..1024));
        let gap = i.abs_diff(j);
        if gap.min(1024 - gap) <= 2 {
            continue;
        }
        let omega = canonical_form_pullback(&c, i, j, None).unwrap();
        let s = cross_ratio_sample(&c, i, j).unwrap();
        worst = worst.max((-0.5 * omega - s.re_density).abs() / s.abs_density);
        count += 1;
    }
    (planar <= 1e-6 && worst <= 1e-3, format!("n=2 {planar:.1e}, n=3 worst {worst:.2e} over {count} pairs"))
}

fn fd_error(c: &PolyCurve) -> f64 {
    let g = discrete_gradient(c, 2.0).unwrap();
    let h = 1e-6 * c.total_length();
    let scale = g.vertex.iter().map(|d| d.norm()).fold(0.0, f64::max).max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..c.len() {
        for axis in 0..3 {
            let shift = |s: f64| {
                let mut v = c.vertices().to_vec();
                v[i][axis] += s;
                energy_alpha(&PolyCurve::closed(v).unwrap(), 2.0).unwrap().value
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            worst = worst.max((fd - g.vertex[i][axis]).abs() / scale);
        }
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, c) in [
        ("circle", generators::circle(64, 1.0).unwrap()),
        ("trefoil", trefoil(64)),
        ("perturbed", generators::perturbed_circle(64, 1, 0.3).unwrap()),
    ] {
        let e = fd_error(&c);
        ok &= e <= 1e-5;
        detail.push(format!("{name} {e:.1e}"));
    }
    (ok, detail.join(", "))
}

fn relaxation() -> Outcome {
    let start = generators::perturbed_circle(128, 1, 0.3).unwrap();
    let t0 = Instant::now();
    let trace = relax(&start, &FlowConfig::default()).unwrap();
    let took = t0.elapsed();
    let hit = trace.records.iter().find(|r| r.energy <= 0.05).map(|r| r.step);
    let monotone = trace.records.windows(2).all(|w| w[1].resampled || w[1].energy <= w[0].energy);
    let fit = circle_fit_residual(&trace.curve);
    let ok = hit.is_some_and(|s| s <= 5000)
        && monotone
        && trace.stop != StopReason::Aborted
        && fit < 1e-2
        && took < Duration::from_secs(300);
    (
        ok,
        format!(
            "E <= 0.05 at step {hit:?}, final {:.2e} after {} steps, monotone {monotone}, circle fit {fit:.1e}, {took:.1?}",
            trace.final_energy(),
            trace.records.len() - 1
        ),
    )
}

fn self_repulsion() -> Outcome {
    let e = |gap| energy_alpha(&generators::clasp(2048, gap).unwrap(), 2.0).unwrap().value;
    let (tight, loose) = (e(1e-3), e(0.1));
    (tight > 10.0 * loose, format!("gap 1e-3: {tight:.1}, gap 0.1: {loose:.2}"))
}

fn near_diagonal_angle() -> Outcome {
    let n = 4096;
    let c = trefoil(n);
    let l = c.total_length();
    let mut lo = f64::MAX;
    let mut hi: f64 = 0.0;
    for k in 1..n / 2 {
        let s = c.arc_distance(100, 100 + k).unwrap() / l;
        if s < 1e-3 {
            continue;
        }
        if s > 1e-2 {
            break;
        }
        let r = conformal_angle(&c, 100, 100 + k).unwrap() / (s * s);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (hi < 2.0 * lo, format!("θ/s² in [{lo:.4}, {hi:.4}]"))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 circle zero-point", circle_zero_point()),
        ("2 Möbius invariance", moebius_invariance()),
        ("3 cosine formula", cosine_equivalence()),
        ("4 cross-ratio energy", cross_ratio_identity()),
    ];
    let (area, light) = signed_area_and_lightlike();
    results.push(("5 signed area", area));
    results.push(("6 lightlike partials", light));
    results.push(("7 link exactness", link_exactness()));
    results.push(("8 Plücker/Lorentz algebra", plucker_lorentz_algebra()));
    results.push(("9 symplectic pullback", symplectic_pullback()));
    results.push(("10 gradient", gradient_correctness()));
    results.push(("11 relaxation", relaxation()));
    results.push(("12 self-repulsion", self_repulsion()));
    results.push(("13 conformal angle", near_diagonal_angle()));

    let mut failed = 0;
    for (name, (ok, detail)) in &results {
        println!("{} criterion {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
