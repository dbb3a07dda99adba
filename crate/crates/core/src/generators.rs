//! Built-in test curves. Smooth families are sampled at equal arclength of
//! the underlying parametric curve.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::{LinkSet, PolyCurve, MIN_ENERGY_VERTICES};
use crate::error::{Error, Result};

fn check_n(n: usize) -> Result<()> {
    if n < MIN_ENERGY_VERTICES {
        return Err(Error::TooFewVertices {
            needed: MIN_ENERGY_VERTICES,
            got: n,
        });
    }
    Ok(())
}

/// Samples `f` on `[t0, t1]` at `n` parameters equally spaced in arclength.
///
/// Closed curves place vertex 0 at `t0` and treat `t1` as a repeat of it.
pub fn sample_by_arclength(
    n: usize,
    closed: bool,
    t0: f64,
    t1: f64,
    f: impl Fn(f64) -> Vector3<f64>,
) -> Result<PolyCurve> {
    let span = t1 - t0;
    let h = 1e-5 * span;
    let speed = |t: f64| {
        let d = (f(t - 2.0 * h) - f(t + 2.0 * h)) / 12.0 + (f(t + h) - f(t - h)) * (2.0 / 3.0);
        d.norm() / h
    };
    let cells = (64 * n).max(8192);
    let dt = span / cells as f64;
    let simpson = |a: f64, b: f64| (b - a) / 6.0 * (speed(a) + 4.0 * speed(0.5 * (a + b)) + speed(b));
    let mut table = Vec::with_capacity(cells + 1);
    table.push(0.0);
    for k in 0..cells {
        let a = t0 + k as f64 * dt;
        let next = table[k] + simpson(a, a + dt);
        table.push(next);
    }
    let total = table[cells];
    let steps = if closed { n } else { n - 1 };
    let verts = (0..n)
        .map(|k| {
            let target = total * k as f64 / steps as f64;
            let cell = table.partition_point(|&s| s <= target).saturating_sub(1).min(cells - 1);
            let a = t0 + cell as f64 * dt;
            let frac = (target - table[cell]) / (table[cell + 1] - table[cell]);
            let mut t = a + frac * dt;
            for _ in 0..3 {
                let s = table[cell] + simpson(a, t);
                t -= (s - target) / speed(t);
            }
            f(t)
        })
        .collect();
    PolyCurve::new(verts, closed)
}

/// Regular `n`-gon inscribed in the circle of radius `r` in the xy-plane.
pub fn circle(n: usize, r: f64) -> Result<PolyCurve> {
    check_n(n)?;
    PolyCurve::from_fn(n, true, |t| Vector3::new(r * t.cos(), r * t.sin(), 0.0))
}

pub fn ellipse(n: usize, a: f64, b: f64) -> Result<PolyCurve> {
    check_n(n)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!("ellipse axes must be positive, got {a}, {b}")));
    }
    sample_by_arclength(n, true, 0.0, TAU, |t| Vector3::new(a * t.cos(), b * t.sin(), 0.0))
}

/// The (p, q) torus knot on the torus with radii 2 and 1; (2, 3) is the trefoil.
pub fn torus_knot(n: usize, p: u32, q: u32) -> Result<PolyCurve> {
    check_n(n)?;
    if p == 0 || q == 0 {
        return Err(Error::InvalidParameter("torus knot needs p, q >= 1".into()));
    }
    let (p, q) = (p as f64, q as f64);
    sample_by_arclength(n, true, 0.0, TAU, |t| torus_point(p, q, 0.0, t))
}

fn torus_point(p: f64, q: f64, phase: f64, t: f64) -> Vector3<f64> {
    let rho = 2.0 + (q * t + phase).cos();
    Vector3::new(rho * (p * t).cos(), rho * (p * t).sin(), (q * t + phase).sin())
}

/// Unit circle with radial and vertical bumps of random phase on modes 2 and 3.
pub fn perturbed_circle(n: usize, seed: u64, amplitude: f64) -> Result<PolyCurve> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k in [2.0, 3.0] {
        let radial = (rng.random_range(0.5..1.0), rng.random_range(0.0..TAU));
        let vertical = (rng.random_range(0.5..1.0), rng.random_range(0.0..TAU));
        modes.push((k, radial, vertical));
    }
    let scale = amplitude / modes.len() as f64;
    sample_by_arclength(n, true, 0.0, TAU, |t| {
        let mut r = 1.0;
        let mut z = 0.0;
        for (k, (ra, rp), (za, zp)) in &modes {
            r += scale * ra * (k * t + rp).cos();
            z += scale * za * (k * t + zp).cos();
        }
        Vector3::new(r * t.cos(), r * t.sin(), z)
    })
}

/// Planar lemniscate-like figure eight, sampled at half-offset parameters
/// so that no vertex lands on the crossing.
pub fn figure_eight(n: usize) -> Result<PolyCurve> {
    check_n(n)?;
    let verts = (0..n)
        .map(|k| {
            let t = TAU * (k as f64 + 0.5) / n as f64;
            Vector3::new(2.0 * t.sin(), t.sin() * t.cos(), 0.0)
        })
        .collect();
    PolyCurve::closed(verts)
}

/// Two round unit circles forming a Hopf link.
pub fn hopf_link(n: usize) -> Result<LinkSet> {
    check_n(n)?;
    let a = circle(n, 1.0)?;
    let b = PolyCurve::from_fn(n, true, |t| Vector3::new(1.0 + t.cos(), 0.0, t.sin()))?;
    LinkSet::new(vec![a, b])
}

/// The (2, 4) torus link: two (1, 2) torus curves half a turn apart.
pub fn torus_link_2_4(n: usize) -> Result<LinkSet> {
    check_n(n)?;
    let comps = [0.0, PI]
        .iter()
        .map(|&phase| sample_by_arclength(n, true, 0.0, TAU, |t| torus_point(1.0, 2.0, phase, t)))
        .collect::<Result<Vec<_>>>()?;
    LinkSet::new(comps)
}

/// A planar loop pinched so that two strands pass at distance `g` near the
/// origin.
pub fn pinched_loop(n: usize, g: f64) -> Result<PolyCurve> {
    check_n(n)?;
    if !(g > 0.0 && g < 2.0) {
        return Err(Error::InvalidParameter(format!("pinch gap {g} not in (0, 2)")));
    }
    sample_by_arclength(n, true, 0.0, TAU, |t| {
        let c = t.cos();
        Vector3::new(2.0 * c, t.sin() * (0.5 * g + (1.0 - 0.5 * g) * c.powi(4)), 0.0)
    })
}

/// A pinched loop whose strand gap is `gap_fraction` times its total length.
pub fn clasp(n: usize, gap_fraction: f64) -> Result<PolyCurve> {
    if !(gap_fraction > 0.0 && gap_fraction < 0.2) {
        return Err(Error::InvalidParameter(format!(
            "clasp gap fraction {gap_fraction} not in (0, 0.2)"
        )));
    }
    let mut g = gap_fraction * 8.0;
    for _ in 0..50 {
        let c = pinched_loop(n.max(64), g)?;
        let next = gap_fraction * c.total_length();
        if (next - g).abs() < 1e-14 * g {
            break;
        }
        g = next;
    }
    pinched_loop(n, g)
}
