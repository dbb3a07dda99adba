//! Renormalized knot energies and their relatives.
//!
//! Every evaluator is a weighted double sum over vertex pairs, see
//! [`crate::quadrature`] for the weights and the diagonal correction.
//! Rows are summed in parallel and reduced sequentially in row order, so
//! results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{min_distance_between, PolyCurve, Polyline, SphereCurve, MIN_ENERGY_VERTICES};
use crate::error::{Error, Result};
use crate::quadrature::{diagonal_factor, SmoothArcs};

/// Constant subtracted from the unit-length double sum at `alpha = 2`.
pub const CIRCLE_RENORMALIZER: f64 = 4.0;

/// Which formula produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Renormalized,
    Cosine,
    Cross,
    Open,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest absolute pair integrand (unit-length units where applicable).
    pub max_integrand: f64,
    /// Smallest distance between distinct vertices.
    pub min_pair_distance: f64,
    /// For open curves: sine of the turning angle at the worst end vertex.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_collinearity_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub alpha: f64,
    pub n: usize,
    pub formula: Formula,
    pub diagnostics: Diagnostics,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 3.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn check_energy_curve<const D: usize>(c: &Polyline<D>, closed: bool) -> Result<()> {
    if c.is_closed() != closed {
        return Err(Error::Closedness {
            expected: if closed { "closed" } else { "open" },
        });
    }
    if c.len() < MIN_ENERGY_VERTICES {
        return Err(Error::TooFewVertices {
            needed: MIN_ENERGY_VERTICES,
            got: c.len(),
        });
    }
    Ok(())
}

/// Per-row accumulator.
#[derive(Clone, Copy)]
struct Row {
    sum: f64,
    max_abs: f64,
    min_dist: f64,
}

fn reduce(rows: Vec<Row>) -> Row {
    rows.into_iter().fold(
        Row {
            sum: 0.0,
            max_abs: 0.0,
            min_dist: f64::INFINITY,
        },
        |acc, r| Row {
            sum: acc.sum + r.sum,
            max_abs: acc.max_abs.max(r.max_abs),
            min_dist: acc.min_dist.min(r.min_dist),
        },
    )
}

/// Weighted sum over ordered pairs `i != j` of `term(i, j, chord)`.
fn pair_sum<const D: usize>(
    c: &Polyline<D>,
    arcs: &SmoothArcs,
    term: impl Fn(usize, usize, f64) -> f64 + Sync,
) -> Result<Row> {
    let n = c.len();
    let verts = c.vertices();
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Row {
                sum: 0.0,
                max_abs: 0.0,
                min_dist: f64::INFINITY,
            };
            for j in (0..n).filter(|&j| j != i) {
                let r = (verts[i] - verts[j]).norm();
                row.min_dist = row.min_dist.min(r);
                let f = term(i, j, r);
                row.max_abs = row.max_abs.max(f.abs());
                row.sum += arcs.weights[j] * f;
            }
            row.sum *= arcs.weights[i];
            row
        })
        .collect();
    let total = reduce(rows);
    if !(total.min_dist > 0.0) {
        return Err(Error::CoincidentPoints(total.min_dist));
    }
    Ok(total)
}

/// Diagonal correction `sum_i Z * w_i^(4-alpha) * alpha * k2_i / 24`.
fn diagonal_correction(arcs: &SmoothArcs, alpha: f64, k2: impl Fn(usize) -> f64) -> f64 {
    let z = diagonal_factor(alpha);
    let n = arcs.len();
    (0..n)
        .map(|i| {
            let one_sided = !arcs.closed && (i == 0 || i == n - 1);
            let side = if one_sided { 0.5 } else { 1.0 };
            side * z * arcs.weights[i].powf(4.0 - alpha) * alpha * k2(i) / 24.0
        })
        .sum()
}

/// The pair sum subtracts `δ^-α + (L - δ)^-α`, which stays smooth where the
/// short and long arcs swap. This puts back the integral of the second term,
/// less its trapezoid value on the diagonal.
pub(crate) fn far_side_correction(arcs: &SmoothArcs, alpha: f64) -> f64 {
    let total = arcs.total;
    let integral = if (alpha - 1.0).abs() < 1e-12 {
        2.0 * total * std::f64::consts::LN_2
    } else {
        2.0 * total.powf(2.0 - alpha) * (2f64.powf(alpha - 1.0) - 1.0) / (alpha - 1.0)
    };
    let diagonal: f64 = arcs.weights.iter().map(|w| w * w).sum::<f64>() * total.powf(-alpha);
    integral - diagonal
}

/// Copy of `c` centred at its centroid and scaled to unit polygon length.
fn normalized(c: &PolyCurve) -> Result<PolyCurve> {
    let centroid = c.centroid();
    let inv = 1.0 / c.total_length();
    c.map(|v| (v - centroid) * inv)
}

/// E^(α) of a closed curve, normalized internally to unit length.
///
/// At `alpha = 2` the constant 4 is subtracted so that round circles score 0.
pub fn energy_alpha(c: &PolyCurve, alpha: f64) -> Result<EnergyReport> {
    check_alpha(alpha)?;
    check_energy_curve(c, true)?;
    let c = &normalized(c)?;
    let arcs = SmoothArcs::new(c);
    let scale = arcs.total;
    let row = pair_sum(c, &arcs, |i, j, r| {
        let d = arcs.arc_distance(i, j);
        r.powf(-alpha) - d.powf(-alpha) - (scale - d).powf(-alpha)
    })?;
    let raw = row.sum + diagonal_correction(&arcs, alpha, |i| arcs.curvature_sq[i])
        + far_side_correction(&arcs, alpha);
    let factor = scale.powf(alpha - 2.0);
    let constant = if alpha == 2.0 { CIRCLE_RENORMALIZER } else { 0.0 };
    Ok(EnergyReport {
        value: factor * raw - constant,
        alpha,
        n: c.len(),
        formula: Formula::Renormalized,
        diagnostics: Diagnostics {
            max_integrand: row.max_abs * scale.powf(alpha),
            min_pair_distance: row.min_dist / scale,
            end_collinearity_defect: None,
        },
    })
}

/// The cutoff form of E^(2): pairs with arc distance ≥ `eps` (unit length)
/// minus the `2 / eps` counterterm. Boundary cells are weighted fractionally.
///
/// Differs from [`energy_alpha`] at `alpha = 2` by O(eps) plus quadrature error.
pub fn energy_cutoff(c: &PolyCurve, eps: f64) -> Result<f64> {
    check_energy_curve(c, true)?;
    let c = &normalized(c)?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!("cutoff eps = {eps} not in (0, 0.5)")));
    }
    let arcs = SmoothArcs::new(c);
    let scale = arcs.total;
    let row = pair_sum(c, &arcs, |i, j, r| {
        let d = arcs.arc_distance(i, j) / scale;
        let w = arcs.weights[j] / scale;
        let frac = ((d + 0.5 * w - eps) / w).clamp(0.0, 1.0);
        frac / (r * r)
    })?;
    Ok(row.sum - 2.0 / eps)
}

/// Cosine formula: the double sum of `(1 - cos θ) / |x - y|²`.
pub fn energy_cosine(c: &PolyCurve) -> Result<EnergyReport> {
    check_energy_curve(c, true)?;
    let c = &normalized(c)?;
    let arcs = SmoothArcs::new(c);
    let tangents: Vec<_> = (0..c.len()).map(|i| c.tangent(i)).collect();
    let verts = c.vertices();
    let row = pair_sum(c, &arcs, |i, j, r| {
        let chord = (verts[j] - verts[i]) / r;
        let u = tangents[i];
        let reflected = chord * (2.0 * u.dot(&chord)) - u;
        // 1 - cos θ for unit vectors
        0.5 * (reflected - tangents[j]).norm_squared() / (r * r)
    })?;
    Ok(EnergyReport {
        value: row.sum,
        alpha: 2.0,
        n: c.len(),
        formula: Formula::Cosine,
        diagnostics: Diagnostics {
            max_integrand: row.max_abs * arcs.total * arcs.total,
            min_pair_distance: row.min_dist / arcs.total,
            end_collinearity_defect: None,
        },
    })
}

/// Interaction term between two disjoint closed components.
pub fn cross_energy(a: &PolyCurve, b: &PolyCurve) -> Result<EnergyReport> {
    // a fixed summation order makes the result exactly symmetric
    let swap = (a.len(), b.len()).cmp(&(b.len(), a.len())).then_with(|| {
        a.vertices()
            .iter()
            .flat_map(|v| v.iter())
            .zip(b.vertices().iter().flat_map(|v| v.iter()))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (a, b) = if swap.is_gt() { (b, a) } else { (a, b) };
    check_energy_curve(a, true)?;
    check_energy_curve(b, true)?;
    let gap = min_distance_between(a, b);
    if gap < 1e-9 * a.total_length().max(b.total_length()) {
        return Err(Error::Intersecting(gap));
    }
    let wa = SmoothArcs::new(a);
    let wb = SmoothArcs::new(b);
    let (va, vb) = (a.vertices(), b.vertices());
    let rows: Vec<Row> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Row {
                sum: 0.0,
                max_abs: 0.0,
                min_dist: f64::INFINITY,
            };
            for j in 0..b.len() {
                let r2 = (va[i] - vb[j]).norm_squared();
                row.min_dist = row.min_dist.min(r2.sqrt());
                row.max_abs = row.max_abs.max(1.0 / r2);
                row.sum += wb.weights[j] / r2;
            }
            row.sum *= wa.weights[i];
            row
        })
        .collect();
    let total = reduce(rows);
    Ok(EnergyReport {
        value: total.sum,
        alpha: 2.0,
        n: a.len() + b.len(),
        formula: Formula::Cross,
        diagnostics: Diagnostics {
            max_integrand: total.max_abs,
            min_pair_distance: total.min_dist,
            end_collinearity_defect: None,
        },
    })
}

/// E^(2) of an open (truncated long) knot: no wraparound, no constant.
pub fn energy_open(c: &PolyCurve) -> Result<EnergyReport> {
    check_energy_curve(c, false)?;
    let arcs = SmoothArcs::new(c);
    let row = pair_sum(c, &arcs, |i, j, r| {
        let d = arcs.arc_distance(i, j);
        1.0 / (r * r) - 1.0 / (d * d)
    })?;
    let value = row.sum + diagonal_correction(&arcs, 2.0, |i| arcs.curvature_sq[i]);
    let n = c.len();
    let end_defect = [1, n - 2]
        .iter()
        .map(|&i| {
            let u = (c.vertex(i) - c.vertex(i - 1)).normalize();
            let w = (c.vertex(i + 1) - c.vertex(i)).normalize();
            u.cross(&w).norm()
        })
        .fold(0.0, f64::max);
    Ok(EnergyReport {
        value,
        alpha: 2.0,
        n,
        formula: Formula::Open,
        diagnostics: Diagnostics {
            max_integrand: row.max_abs,
            min_pair_distance: row.min_dist,
            end_collinearity_defect: Some(end_defect),
        },
    })
}

/// E^(α) on the unit 3-sphere with geodesic distance in place of the chord.
pub fn energy_sphere(c: &SphereCurve, alpha: f64) -> Result<EnergyReport> {
    check_alpha(alpha)?;
    check_energy_curve(c, true)?;
    if let Some(v) = c.vertices().iter().find(|v| (v.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::OffSphere(v.norm()));
    }
    let arcs = SmoothArcs::new(c);
    let row = pair_sum(c, &arcs, |i, j, r| {
        let geodesic = 2.0 * (0.5 * r).min(1.0).asin();
        geodesic.powf(-alpha) - arcs.arc_distance(i, j).powf(-alpha)
    })?;
    // geodesic curvature squared = ambient curvature squared - 1 on the unit sphere
    let value = row.sum + diagonal_correction(&arcs, alpha, |i| (arcs.curvature_sq[i] - 1.0).max(0.0));
    Ok(EnergyReport {
        value,
        alpha,
        n: c.len(),
        formula: Formula::Sphere,
        diagnostics: Diagnostics {
            max_integrand: row.max_abs,
            min_pair_distance: row.min_dist,
            end_collinearity_defect: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::moebius::lift_curve_to_sphere;
    use nalgebra::{Rotation3, Vector3, Vector4};

    #[test]
    fn circle_is_zero() {
        let e = energy_alpha(&generators::circle(256, 1.0).unwrap(), 2.0).unwrap();
        assert!(e.value.abs() < 5e-3, "{}", e.value);
    }

    #[test]
    fn scale_and_rigid_invariance() {
        let c = generators::torus_knot(200, 2, 3).unwrap();
        let e0 = energy_alpha(&c, 2.0).unwrap().value;
        let moved = c
            .map(|v| Rotation3::from_euler_angles(0.4, 1.0, -0.7) * v * 7.3 + Vector3::new(1.0, -2.0, 5.0))
            .unwrap();
        let e1 = energy_alpha(&moved, 2.0).unwrap().value;
        assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0) * 10.0, "{e0} {e1}");
        let circ = generators::circle(128, 1.0).unwrap();
        let a = energy_alpha(&circ, 2.0).unwrap().value;
        let b = energy_alpha(&circ.scaled(7.3).unwrap(), 2.0).unwrap().value;
        assert!((a - b).abs() < 1e-12, "{a} {b} {}", a - b);
    }

    #[test]
    fn rejects_bad_alpha_and_open_curves() {
        let c = generators::circle(32, 1.0).unwrap();
        assert!(matches!(energy_alpha(&c, 3.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(energy_alpha(&c, 0.0), Err(Error::InvalidAlpha(_))));
        let open = PolyCurve::open(c.vertices().to_vec()).unwrap();
        assert!(matches!(energy_alpha(&open, 2.0), Err(Error::Closedness { .. })));
        let tiny = PolyCurve::from_fn(6, true, |t| Vector3::new(t.cos(), t.sin(), 0.0)).unwrap();
        assert!(matches!(energy_alpha(&tiny, 2.0), Err(Error::TooFewVertices { .. })));
    }

    #[test]
    fn circle_zero_for_other_alphas_is_scale_free() {
        // For alpha != 2 nothing is subtracted; the value is still scale-invariant.
        let c = generators::circle(128, 1.0).unwrap();
        for alpha in [1.0, 2.5] {
            let a = energy_alpha(&c, alpha).unwrap().value;
            let b = energy_alpha(&c.scaled(3.0).unwrap(), alpha).unwrap().value;
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn cosine_matches_renormalized_on_circle_and_ellipse() {
        let circ = generators::circle(256, 1.0).unwrap();
        assert!(energy_cosine(&circ).unwrap().value.abs() < 5e-3);
        let ell = generators::ellipse(256, 2.0, 1.0).unwrap();
        let a = energy_alpha(&ell, 2.0).unwrap().value;
        let b = energy_cosine(&ell).unwrap().value;
        assert!((a - b).abs() < 1e-2 * a);
    }

    #[test]
    fn cutoff_form_approaches_renormalized_form() {
        let c = generators::ellipse(2048, 2.0, 1.0).unwrap();
        let e = energy_alpha(&c, 2.0).unwrap().value;
        let gaps: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&eps| (energy_cutoff(&c, eps).unwrap() - e).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        assert!(gaps[2] < 0.2, "{gaps:?}");
    }

    #[test]
    fn cross_energy_symmetry_and_decay() {
        let a = generators::circle(64, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for d in [10.0, 100.0, 1000.0] {
            let b = a.translated(&Vector3::new(d, 0.0, 0.0)).unwrap();
            let ab = cross_energy(&a, &b).unwrap().value;
            let ba = cross_energy(&b, &a).unwrap().value;
            assert_eq!(ab, ba);
            assert!(ab > 0.0 && ab < last);
            last = ab;
        }
        assert!(matches!(cross_energy(&a, &a), Err(Error::Intersecting(_))));
    }

    #[test]
    fn open_straight_segment_is_zero() {
        let c = PolyCurve::open((0..128).map(|k| Vector3::new(k as f64 / 127.0, 0.0, 0.0)).collect()).unwrap();
        let e = energy_open(&c).unwrap();
        assert!(e.value.abs() < 1e-6, "{}", e.value);
        assert_eq!(e.diagnostics.end_collinearity_defect, Some(0.0));
    }

    #[test]
    fn open_bump_is_positive() {
        let c = PolyCurve::open(
            (0..200)
                .map(|k| {
                    let x = -5.0 + 10.0 * k as f64 / 199.0;
                    Vector3::new(x, 0.5 * (-x * x).exp(), 0.0)
                })
                .collect(),
        )
        .unwrap();
        assert!(energy_open(&c).unwrap().value > 0.0);
    }

    #[test]
    fn great_circle_on_sphere_is_zero() {
        let c = SphereCurve::from_fn(256, true, |t| Vector4::new(t.cos(), 0.0, t.sin(), 0.0)).unwrap();
        for alpha in [0.5, 1.5, 2.0, 2.7] {
            let e = energy_sphere(&c, alpha).unwrap().value;
            assert!(e.abs() < 5e-3, "alpha {alpha}: {e}");
        }
    }

    #[test]
    fn small_circle_on_sphere_is_positive() {
        let c = SphereCurve::from_fn(256, true, |t| {
            Vector4::new(0.5 * t.cos(), 0.5 * t.sin(), 0.0, 0.75f64.sqrt())
        })
        .unwrap();
        assert!(energy_sphere(&c, 2.0).unwrap().value > 0.0);
        let off = SphereCurve::from_fn(32, true, |t| Vector4::new(t.cos(), t.sin(), 0.1, 0.0)).unwrap();
        assert!(matches!(energy_sphere(&off, 2.0), Err(Error::OffSphere(_))));
    }

    #[test]
    fn lifted_trefoil_sphere_energy_converges() {
        let coarse = lift_curve_to_sphere(&generators::torus_knot(256, 2, 3).unwrap()).unwrap();
        let fine = lift_curve_to_sphere(&generators::torus_knot(512, 2, 3).unwrap()).unwrap();
        let a = energy_sphere(&coarse, 2.0).unwrap().value;
        let b = energy_sphere(&fine, 2.0).unwrap().value;
        assert!((a - b).abs() < 1e-2 * b.abs(), "{a} {b}");
    }

    #[test]
    fn report_serializes_with_expected_fields() {
        let e = energy_alpha(&generators::circle(16, 1.0).unwrap(), 2.0).unwrap();
        let v = serde_json::to_value(&e).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["alpha", "diagnostics", "formula", "n", "value"]);
        assert_eq!(v["formula"], "renormalized");
    }
}
