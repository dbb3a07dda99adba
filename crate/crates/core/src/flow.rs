//! Exact gradient of the discrete E^(α) and a descent flow built on it.
//!
//! The gradient is reverse-mode differentiation of exactly the sum that
//! [`crate::energy::energy_alpha`] evaluates, including the osculating-arc
//! lengths, trapezoid weights and diagonal correction.

use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::curve::PolyCurve;
use crate::energy::{far_side_correction, CIRCLE_RENORMALIZER};
use crate::error::{Error, Result};
use crate::quadrature::{diagonal_factor, SmoothArcs};

/// Metric in which the descent direction is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Vertex gradient divided by the vertex weight.
    #[default]
    L2,
    /// Gradient smoothed by the inverse of `1 + |k|^3` on Fourier modes.
    Sobolev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FlowConfig {
    pub alpha: f64,
    pub step_init: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub resample_every: usize,
    pub min_self_dist_factor: f64,
    pub metric: Metric,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            step_init: 1e-4,
            max_steps: 5000,
            grad_tol: 1e-8,
            resample_every: 10,
            min_self_dist_factor: 0.05,
            metric: Metric::L2,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 3.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("stepInit must be positive");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("gradTol must be non-negative");
        }
        if self.max_steps == 0 {
            return bad("maxSteps must be at least 1");
        }
        if self.resample_every == 0 {
            return bad("resampleEvery must be at least 1");
        }
        if !(self.min_self_dist_factor >= 0.0) {
            return bad("minSelfDistFactor must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub step: usize,
    pub energy: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    pub min_self_dist: f64,
    pub resampled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    Converged,
    MaxSteps,
    /// Line search could not decrease the energy any further.
    Stalled,
    /// A step would have brought two strands too close together.
    Aborted,
    /// The caller's callback asked to stop.
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
    pub curve: PolyCurve,
    /// Threshold used for the self-distance guard, in unit-length units.
    pub threshold: f64,
}

impl FlowTrace {
    pub fn final_energy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.energy)
    }

    /// Error describing the abort, if the flow aborted.
    pub fn abort_error(&self) -> Option<Error> {
        (self.stop == StopReason::Aborted).then(|| {
            let last = self.records.last();
            Error::FlowAbort {
                step: last.map_or(0, |r| r.step),
                min_dist: last.map_or(0.0, |r| r.min_self_dist),
                threshold: self.threshold,
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub energy: f64,
    /// dE/dv_i for each vertex.
    pub vertex: Vec<Vector3<f64>>,
    /// Vertex weights of the quadrature, for converting to an L2 gradient.
    pub weights: Vec<f64>,
}

/// Partials of the Menger squared curvature of (a, b, c) with respect to
/// the two edge vectors u = b - a and w = c - b.
fn menger_partials(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let u = b - a;
    let w = c - b;
    let p = u.norm_squared();
    let q = w.norm_squared();
    let m = u.dot(&w);
    let e = p + q + 2.0 * m;
    let raw = 4.0 * (p * q - m * m) / (p * q * e);
    if raw <= 0.0 {
        return (Vector3::zeros(), Vector3::zeros());
    }
    let kp = 4.0 / (p * e) - raw * (1.0 / p + 1.0 / e);
    let kq = 4.0 / (q * e) - raw * (1.0 / q + 1.0 / e);
    let km = -8.0 * m / (p * q * e) - 2.0 * raw / e;
    (u * (2.0 * kp) + w * km, w * (2.0 * kq) + u * km)
}

/// Value and exact gradient of the discrete E^(α) on the curve as given.
///
/// The discrete energy is scale and translation invariant, so this agrees
/// with [`crate::energy::energy_alpha`] without normalizing first.
pub fn discrete_gradient(c: &PolyCurve, alpha: f64) -> Result<Gradient> {
    if !(alpha > 0.0 && alpha < 3.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !c.is_closed() {
        return Err(Error::Closedness { expected: "closed" });
    }
    if c.len() < crate::curve::MIN_ENERGY_VERTICES {
        return Err(Error::TooFewVertices {
            needed: crate::curve::MIN_ENERGY_VERTICES,
            got: c.len(),
        });
    }
    let n = c.len();
    let v = c.vertices();
    let arcs = SmoothArcs::new(c);
    let total = arcs.total;
    let w = &arcs.weights;
    let pos = &arcs.positions;

    struct RowAdj {
        g: f64,
        dw: f64,
        ds: f64,
        da: f64,
        dv: Vector3<f64>,
        min_r: f64,
    }
    // Row i gathers the derivative of both orderings of each pair with
    // respect to the variables owned by i; the shared total length gets half.
    let rows: Vec<RowAdj> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = RowAdj {
                g: 0.0,
                dw: 0.0,
                ds: 0.0,
                da: 0.0,
                dv: Vector3::zeros(),
                min_r: f64::INFINITY,
            };
            for j in (0..n).filter(|&j| j != i) {
                let diff = v[i] - v[j];
                let r = diff.norm();
                row.min_r = row.min_r.min(r);
                let sd = pos[j] - pos[i];
                let d = sd.abs();
                let ra = r.powf(-alpha);
                let near = d.powf(-alpha);
                let far = (total - d).powf(-alpha);
                let f = ra - near - far;
                let wij = w[i] * w[j];
                row.g += wij * f;
                row.dw += 2.0 * w[j] * f;
                row.dv += diff * (-2.0 * alpha * wij * ra / (r * r));
                let dd = 2.0 * alpha * wij * (near / d - far / (total - d));
                row.ds -= dd * sd.signum();
                row.da += alpha * wij * far / (total - d);
            }
            row
        })
        .collect();
    let min_r = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.min_r));
    if !(min_r > 0.0) {
        return Err(Error::CoincidentPoints(min_r));
    }

    let z = diagonal_factor(alpha);
    let mut g = 0.0;
    let mut a_bar = 0.0;
    let mut w_bar = vec![0.0; n];
    let mut s_bar = vec![0.0; n];
    let mut k_bar = vec![0.0; n];
    let mut v_bar: Vec<Vector3<f64>> = Vec::with_capacity(n);
    for (i, r) in rows.into_iter().enumerate() {
        g += r.g;
        a_bar += r.da;
        w_bar[i] = r.dw;
        s_bar[i] = r.ds;
        v_bar.push(r.dv);
    }
    for i in 0..n {
        let k2 = arcs.curvature_sq[i];
        let coef = z * alpha / 24.0;
        g += coef * w[i].powf(4.0 - alpha) * k2;
        w_bar[i] += coef * (4.0 - alpha) * w[i].powf(3.0 - alpha) * k2;
        k_bar[i] += coef * w[i].powf(4.0 - alpha);
    }

    g += far_side_correction(&arcs, alpha);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let integral = far_side_correction(&arcs, alpha) + w2 * total.powf(-alpha);
    a_bar += (2.0 - alpha) * integral / total + alpha * w2 * total.powf(-alpha - 1.0);
    for i in 0..n {
        w_bar[i] -= 2.0 * w[i] * total.powf(-alpha);
    }

    let factor = total.powf(alpha - 2.0);
    a_bar = factor * a_bar + (alpha - 2.0) * total.powf(alpha - 3.0) * g;
    for x in w_bar.iter_mut().chain(s_bar.iter_mut()).chain(k_bar.iter_mut()) {
        *x *= factor;
    }
    for x in v_bar.iter_mut() {
        *x *= factor;
    }
    let energy = factor * g - if alpha == 2.0 { CIRCLE_RENORMALIZER } else { 0.0 };

    // positions[i] is the sum of arcs[0..i]
    let mut tail = 0.0;
    let mut arc_bar = vec![0.0; n];
    for k in (0..n).rev() {
        arc_bar[k] = a_bar + tail + 0.5 * (w_bar[k] + w_bar[(k + 1) % n]);
        tail += s_bar[k];
    }
    for k in 0..n {
        let k1 = (k + 1) % n;
        let edge = v[k1] - v[k];
        let l = edge.norm();
        let m = 0.5 * (arcs.curvature_sq[k] + arcs.curvature_sq[k1]);
        let l_bar = arc_bar[k] * (1.0 + m * l * l / 8.0);
        let m_bar = arc_bar[k] * l * l * l / 24.0;
        k_bar[k] += 0.5 * m_bar;
        k_bar[k1] += 0.5 * m_bar;
        let dl = edge * (l_bar / l);
        v_bar[k1] += dl;
        v_bar[k] -= dl;
    }
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let (gu, gw) = menger_partials(v[prev], v[i], v[next]);
        v_bar[prev] -= gu * k_bar[i];
        v_bar[i] += (gu - gw) * k_bar[i];
        v_bar[next] += gw * k_bar[i];
    }
    Ok(Gradient {
        energy,
        vertex: v_bar,
        weights: arcs.weights,
    })
}

fn l2_norm(g: &Gradient) -> f64 {
    g.vertex
        .iter()
        .zip(&g.weights)
        .map(|(d, w)| d.norm_squared() / w)
        .sum::<f64>()
        .sqrt()
}

struct Smoother {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl Smoother {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let symbol = (0..n)
            .map(|k| {
                let k = k.min(n - k) as f64;
                1.0 / ((1.0 + k * k * k) * n as f64)
            })
            .collect();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            symbol,
        }
    }

    fn apply(&self, g: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); g.len()];
        for axis in 0..3 {
            let mut buf: Vec<Complex<f64>> = g.iter().map(|d| Complex::new(d[axis], 0.0)).collect();
            self.forward.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.symbol) {
                *b *= *s;
            }
            self.inverse.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                o[axis] = b.re;
            }
        }
        out
    }
}

fn descent_direction(g: &Gradient, metric: Metric, smoother: &Smoother) -> Vec<Vector3<f64>> {
    match metric {
        Metric::L2 => g.vertex.iter().zip(&g.weights).map(|(d, w)| d / *w).collect(),
        Metric::Sobolev => {
            let mean_w = g.weights.iter().sum::<f64>() / g.weights.len() as f64;
            smoother.apply(&g.vertex).into_iter().map(|d| d / mean_w).collect()
        }
    }
}

fn unit_length(c: &PolyCurve) -> Result<PolyCurve> {
    let centroid = c.centroid();
    let inv = 1.0 / c.total_length();
    c.map(|v| (v - centroid) * inv)
}

/// The unit-length starting curve and its step-0 record, with no descent.
/// Stops as aborted if the start is already below the self-distance guard.
pub fn initial_state(start: &PolyCurve, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let n = start.len();
    let threshold = cfg.min_self_dist_factor / n as f64;
    let curve = unit_length(start)?;
    let grad = discrete_gradient(&curve, cfg.alpha)?;
    let record = StepRecord {
        step: 0,
        energy: crate::energy::energy_alpha(&curve, cfg.alpha)?.value,
        step_size: 0.0,
        grad_norm: l2_norm(&grad),
        min_self_dist: curve.min_self_distance().unwrap_or(f64::INFINITY),
        resampled: false,
    };
    let stop = if record.min_self_dist < threshold {
        StopReason::Aborted
    } else if record.grad_norm <= cfg.grad_tol {
        StopReason::Converged
    } else {
        StopReason::MaxSteps
    };
    Ok(FlowTrace {
        records: vec![record],
        stop,
        curve,
        threshold,
    })
}

/// Runs descent on E^(α) from `start`, calling `on_step` after each
/// accepted step. Returning `false` from the callback stops the flow.
///
/// The curve is centred and scaled to unit length first, and again after
/// each resampling, so self-distances are in unit-length units.
pub fn relax_with(
    start: &PolyCurve,
    cfg: &FlowConfig,
    mut on_step: impl FnMut(&StepRecord, &PolyCurve) -> bool,
) -> Result<FlowTrace> {
    let mut trace = initial_state(start, cfg)?;
    if trace.stop == StopReason::Aborted {
        return Ok(trace);
    }
    let n = start.len();
    let threshold = trace.threshold;
    let smoother = Smoother::new(n);
    let mut curve = trace.curve.clone();
    let mut grad = discrete_gradient(&curve, cfg.alpha)?;
    let min_dist = |c: &PolyCurve| c.min_self_distance().unwrap_or(f64::INFINITY);
    let mut records = std::mem::take(&mut trace.records);
    let finish = |records, stop, curve| {
        Ok(FlowTrace {
            records,
            stop,
            curve,
            threshold,
        })
    };

    let mut tau = cfg.step_init;
    let mut streak = 0;
    for step in 1..=cfg.max_steps {
        let prev = records.last().expect("trace starts with a record");
        if prev.grad_norm <= cfg.grad_tol {
            return finish(records, StopReason::Converged, curve);
        }
        let dir = descent_direction(&grad, cfg.metric, &smoother);
        let floor = cfg.step_init * 1e-16;
        let accepted = loop {
            if tau < floor {
                break None;
            }
            let moved: Vec<_> = curve.vertices().iter().zip(&dir).map(|(p, d)| p - d * tau).collect();
            if let Ok(trial) = PolyCurve::closed(moved) {
                if let Ok(e) = crate::energy::energy_alpha(&trial, cfg.alpha) {
                    if e.value < prev.energy {
                        break Some((trial, e.value));
                    }
                }
            }
            tau *= 0.5;
            streak = 0;
        };
        let Some((trial, trial_energy)) = accepted else {
            return finish(records, StopReason::Stalled, curve);
        };
        let used = tau;
        streak += 1;
        if streak >= 5 {
            tau = cfg.step_init;
            streak = 0;
        }

        let d = min_dist(&trial);
        if d < threshold {
            records.push(StepRecord {
                step,
                energy: trial_energy,
                step_size: used,
                grad_norm: f64::NAN,
                min_self_dist: d,
                resampled: false,
            });
            return finish(records, StopReason::Aborted, curve);
        }
        curve = trial;
        let resampled = step % cfg.resample_every == 0;
        if resampled {
            curve = unit_length(&curve.resample_uniform(n)?)?;
        }
        grad = discrete_gradient(&curve, cfg.alpha)?;
        let energy = if resampled {
            crate::energy::energy_alpha(&curve, cfg.alpha)?.value
        } else {
            trial_energy
        };
        let rec = StepRecord {
            step,
            energy,
            step_size: used,
            grad_norm: l2_norm(&grad),
            min_self_dist: if resampled { min_dist(&curve) } else { d },
            resampled,
        };
        let go_on = on_step(&rec, &curve);
        records.push(rec);
        if !go_on {
            return finish(records, StopReason::Interrupted, curve);
        }
    }
    let stop = if records.last().is_some_and(|r| r.grad_norm <= cfg.grad_tol) {
        StopReason::Converged
    } else {
        StopReason::MaxSteps
    };
    finish(records, stop, curve)
}

/// Largest deviation of the vertices from their best-fit circle, relative
/// to its radius. Combines the out-of-plane offset and the radial error.
pub fn circle_fit_residual(c: &PolyCurve) -> f64 {
    let centroid = c.centroid();
    let mut cov = nalgebra::Matrix3::zeros();
    for v in c.vertices() {
        let d = v - centroid;
        cov += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1 = eig.eigenvectors.column(order[0]).into_owned();
    let e2 = eig.eigenvectors.column(order[1]).into_owned();
    let normal = eig.eigenvectors.column(order[2]).into_owned();
    let planar: Vec<(f64, f64)> = c
        .vertices()
        .iter()
        .map(|v| ((v - centroid).dot(&e1), (v - centroid).dot(&e2)))
        .collect();
    // algebraic fit x^2 + y^2 = 2ax + 2by + k
    let mut m = nalgebra::Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for &(x, y) in &planar {
        let row = Vector3::new(2.0 * x, 2.0 * y, 1.0);
        m += row * row.transpose();
        rhs += row * (x * x + y * y);
    }
    let Some(sol) = m.lu().solve(&rhs) else {
        return f64::INFINITY;
    };
    let radius = (sol[2] + sol[0] * sol[0] + sol[1] * sol[1]).sqrt();
    c.vertices()
        .iter()
        .zip(&planar)
        .map(|(v, &(x, y))| {
            let radial = ((x - sol[0]).hypot(y - sol[1]) - radius).abs();
            radial.hypot((v - centroid).dot(&normal)) / radius
        })
        .fold(0.0, f64::max)
}

pub fn relax(start: &PolyCurve, cfg: &FlowConfig) -> Result<FlowTrace> {
    relax_with(start, cfg, |_, _| true)
}
