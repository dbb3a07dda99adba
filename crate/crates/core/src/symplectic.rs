//! The identification Sⁿ × Sⁿ ∖ Δ → T*Sⁿ and the pull-back of the canonical
//! symplectic form Σ dq_k ∧ dp_k along a knot.
//!
//! φ_x(y) is the stereographic projection of y from x onto the hyperplane
//! through the origin orthogonal to x, read as a covector at x through the
//! round metric.

use nalgebra::{DVector, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{cross_ratio_between, cross_ratio_sample};
use crate::curve::{LinkSet, PolyCurve};
use crate::error::{Error, Result};
use crate::moebius::lift_to_sphere;
use crate::quadrature::{derivative_weights, SmoothArcs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CotangentPoint<const N: usize> {
    pub base: SVector<f64, N>,
    pub covector: SVector<f64, N>,
}

fn check_unit<const N: usize>(v: &SVector<f64, N>) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::OffSphere(norm));
    }
    Ok(())
}

pub fn phi_identify<const N: usize>(x: &SVector<f64, N>, y: &SVector<f64, N>) -> Result<CotangentPoint<N>> {
    check_unit(x)?;
    check_unit(y)?;
    let c = x.dot(y);
    let denom = 1.0 - c;
    if denom < 1e-14 {
        return Err(Error::CoincidentPoints((x - y).norm()));
    }
    Ok(CotangentPoint {
        base: *x,
        covector: (y - x * c) / denom,
    })
}

/// Inverse of [`phi_identify`]: the point of Sⁿ whose projection is the covector.
pub fn unproject<const N: usize>(cp: &CotangentPoint<N>) -> SVector<f64, N> {
    let p2 = cp.covector.norm_squared();
    (cp.covector * 2.0 + cp.base * (p2 - 1.0)) / (p2 + 1.0)
}

/// Stereographic chart of Sⁿ from the pole `sign · e_last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    North,
    South,
}

/// Charts are switched once the base point is this close (in angle) to the pole.
pub const CHART_SWITCH_ANGLE: f64 = std::f64::consts::PI / 6.0;

impl Chart {
    fn sign(self) -> f64 {
        match self {
            Chart::North => 1.0,
            Chart::South => -1.0,
        }
    }

    /// The north chart unless `x` lies within 30° of the north pole.
    pub fn for_point<const N: usize>(x: &SVector<f64, N>) -> Chart {
        if x[N - 1] > CHART_SWITCH_ANGLE.cos() {
            Chart::South
        } else {
            Chart::North
        }
    }

    pub fn coords<const N: usize>(self, x: &SVector<f64, N>) -> DVector<f64> {
        let d = 1.0 - self.sign() * x[N - 1];
        DVector::from_fn(N - 1, |k, _| x[k] / d)
    }

    pub fn point<const N: usize>(self, u: &DVector<f64>) -> SVector<f64, N> {
        let u2 = u.norm_squared();
        SVector::from_fn(|k, _| {
            if k + 1 < N {
                2.0 * u[k] / (u2 + 1.0)
            } else {
                self.sign() * (u2 - 1.0) / (u2 + 1.0)
            }
        })
    }

    /// Directional derivative of the chart map at `x` along `v`, by central
    /// differences with one Richardson step.
    pub fn differential<const N: usize>(self, x: &SVector<f64, N>, v: &SVector<f64, N>) -> DVector<f64> {
        const H: f64 = 1e-5;
        let scale = v.norm();
        if scale == 0.0 {
            return DVector::zeros(N - 1);
        }
        let dir = v / scale;
        let diff = |h: f64| (self.coords(&(x + dir * h)) - self.coords(&(x - dir * h))) / (2.0 * h);
        (diff(0.5 * H) * 4.0 - diff(H)) / 3.0 * scale
    }

    /// Coordinate vector fields ∂x/∂u_k at `u`, by central differences with
    /// one Richardson step.
    pub fn frame<const N: usize>(self, u: &DVector<f64>) -> Vec<SVector<f64, N>> {
        const H: f64 = 1e-5;
        let diff = |k: usize, h: f64| {
            let mut up = u.clone();
            let mut down = u.clone();
            up[k] += h;
            down[k] -= h;
            (self.point::<N>(&up) - self.point::<N>(&down)) / (2.0 * h)
        };
        (0..N - 1)
            .map(|k| (diff(k, 0.5 * H) * 4.0 - diff(k, H)) / 3.0)
            .collect()
    }
}

/// ω(a, b) = Σ_k dq_k(a) dp_k(b) − dq_k(b) dp_k(a).
pub fn canonical_form(dq_a: &[f64], dp_a: &[f64], dq_b: &[f64], dp_b: &[f64]) -> f64 {
    let ab: f64 = dq_a.iter().zip(dp_b).map(|(q, p)| q * p).sum();
    let ba: f64 = dq_b.iter().zip(dp_a).map(|(q, p)| q * p).sum();
    ab - ba
}

/// ω(∂_s, ∂_t) for the surface (s, t) ↦ (x(s), φ_{x(s)}(y(t))).
///
/// `xs` and `ys` are stencil samples around the evaluation point (the centre
/// sample sits at the node 0 of `s_nodes` / `t_nodes`).
pub fn pullback_from_samples<const N: usize>(
    chart: Chart,
    xs: &[SVector<f64, N>],
    s_nodes: &[f64],
    ys: &[SVector<f64, N>],
    t_nodes: &[f64],
) -> Result<f64> {
    let centre = s_nodes
        .iter()
        .position(|&s| s == 0.0)
        .ok_or(Error::InvalidParameter("stencil must contain the node 0".into()))?;
    let x0 = xs[centre];
    let ws = derivative_weights(s_nodes);
    let wt = derivative_weights(t_nodes);
    let u0 = chart.coords(&x0);
    let frame = chart.frame::<N>(&u0);
    // ambient velocity, projected to T_x Sⁿ, then pushed through the chart
    let mut velocity = SVector::<f64, N>::zeros();
    for (x, w) in xs.iter().zip(&ws) {
        velocity += x * *w;
    }
    velocity -= x0 * x0.dot(&velocity);
    let dq_s: Vec<f64> = chart.differential(&x0, &velocity).iter().copied().collect();
    let mut dp_t = vec![0.0; N - 1];
    for (y, w) in ys.iter().zip(&wt) {
        let p = phi_identify(&x0, y)?.covector;
        for k in 0..N - 1 {
            dp_t[k] += w * p.dot(&frame[k]);
        }
    }
    // x does not move along t, so dq(∂_t) = 0
    Ok(canonical_form(&dq_s, &vec![0.0; N - 1], &vec![0.0; N - 1], &dp_t))
}

/// Pull-back density for parametric curves x(s), y(t) on Sⁿ, differentiated
/// with a five-point stencil of step `h`.
pub fn parametric_pullback<const N: usize>(
    x: impl Fn(f64) -> SVector<f64, N>,
    y: impl Fn(f64) -> SVector<f64, N>,
    s: f64,
    t: f64,
    h: f64,
    chart: Option<Chart>,
) -> Result<f64> {
    let nodes: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| k * h).collect();
    let xs: Vec<_> = nodes.iter().map(|d| x(s + d)).collect();
    let ys: Vec<_> = nodes.iter().map(|d| y(t + d)).collect();
    let chart = chart.unwrap_or_else(|| Chart::for_point(&xs[2]));
    pullback_from_samples(chart, &xs, &nodes, &ys, &nodes)
}

const STENCIL: [isize; 5] = [-2, -1, 0, 1, 2];

fn lifted_stencil(c: &PolyCurve, arcs: &SmoothArcs, i: usize) -> (Vec<SVector<f64, 4>>, Vec<f64>) {
    let n = c.len() as isize;
    let pts = STENCIL
        .iter()
        .map(|&k| lift_to_sphere(c.vertex((i as isize + k).rem_euclid(n) as usize).into()))
        .collect();
    let nodes = STENCIL.iter().map(|&k| arcs.offset(i, k)).collect();
    (pts, nodes)
}

fn pair_pullback(
    a: &PolyCurve,
    arcs_a: &SmoothArcs,
    i: usize,
    b: &PolyCurve,
    arcs_b: &SmoothArcs,
    j: usize,
    chart: Option<Chart>,
) -> Result<f64> {
    let (xs, s_nodes) = lifted_stencil(a, arcs_a, i);
    let (ys, t_nodes) = lifted_stencil(b, arcs_b, j);
    let chart = chart.unwrap_or_else(|| Chart::for_point(&xs[2]));
    pullback_from_samples(chart, &xs, &s_nodes, &ys, &t_nodes)
}

/// ω(∂_s, ∂_t) at the vertex pair (i, j) of the curve lifted to S³, against
/// ds dt in the arclength of `c`. `chart: None` picks the chart automatically.
pub fn canonical_form_pullback(c: &PolyCurve, i: usize, j: usize, chart: Option<Chart>) -> Result<f64> {
    if !c.is_closed() {
        return Err(Error::Closedness { expected: "closed" });
    }
    let n = c.len();
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
    }
    let d = i.abs_diff(j);
    if d.min(n - d) <= 2 {
        return Err(Error::InvalidParameter(format!(
            "vertices {i} and {j} are too close for the derivative stencil"
        )));
    }
    let arcs = SmoothArcs::new(c);
    pair_pullback(c, &arcs, i, c, &arcs, j, chart)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticRow {
    pub i: usize,
    pub j: usize,
    pub pullback_density: f64,
    pub re_density: f64,
    /// |−ω/2 − Re Ω| relative to |Ω|.
    pub rel_err: f64,
}

/// Compares −ω/2 with Re Ω on all pairs of vertices that are multiples of
/// `stride` and more than two indices apart.
pub fn symplectic_check(c: &PolyCurve, stride: usize) -> Result<Vec<SymplecticRow>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    if !c.is_closed() {
        return Err(Error::Closedness { expected: "closed" });
    }
    let n = c.len();
    let arcs = SmoothArcs::new(c);
    let rows: Vec<Result<Vec<SymplecticRow>>> = (0..n)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            (0..n)
                .step_by(stride)
                .filter(|&j| {
                    let d = i.abs_diff(j);
                    d.min(n - d) > 2
                })
                .map(|j| {
                    let omega = pair_pullback(c, &arcs, i, c, &arcs, j, None)?;
                    let s = cross_ratio_sample(c, i, j)?;
                    Ok(SymplecticRow {
                        i,
                        j,
                        pullback_density: omega,
                        re_density: s.re_density,
                        rel_err: (-0.5 * omega - s.re_density).abs() / s.abs_density,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    /// Σ Re Ω over the product of the two components.
    pub signed: f64,
    /// Σ |Re Ω| over the same grid.
    pub absolute: f64,
}

impl ExactnessReport {
    pub fn ratio(&self) -> f64 {
        self.signed.abs() / self.absolute
    }
}

/// Integral of Re Ω over K₁ × K₂ for a two-component link.
pub fn exactness_integral(link: &LinkSet) -> Result<ExactnessReport> {
    if link.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "exactness integral needs 2 components, got {}",
            link.len()
        )));
    }
    let (a, b) = (&link.components()[0], &link.components()[1]);
    let (wa, wb) = (SmoothArcs::new(a), SmoothArcs::new(b));
    let rows: Vec<Result<(f64, f64)>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut signed = 0.0;
            let mut absolute = 0.0;
            for j in 0..b.len() {
                let v = cross_ratio_between(a, i, b, j)?.re_density * wa.weights[i] * wb.weights[j];
                signed += v;
                absolute += v.abs();
            }
            Ok((signed, absolute))
        })
        .collect();
    let mut report = ExactnessReport {
        signed: 0.0,
        absolute: 0.0,
    };
    for r in rows {
        let (s, a) = r?;
        report.signed += s;
        report.absolute += a;
    }
    Ok(report)
}
