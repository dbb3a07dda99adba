//! Conformal angle, tangent circles, bitangent spheres and the
//! infinitesimal cross ratio Ω = e^{iθ} dx dy / |x − y|².

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Point, Polyline};
use crate::error::{Error, Result};
use crate::quadrature::SmoothArcs;

/// Below this θ the imaginary part is flagged as possibly non-smooth.
pub const THETA_FLAG: f64 = 1e-8;

/// A circle or a line. The circle is `center + radius (cos φ u + sin φ v)`,
/// oriented by increasing φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircleGeom<const D: usize> {
    Circle {
        center: Point<D>,
        radius: f64,
        u: Point<D>,
        v: Point<D>,
    },
    Line {
        point: Point<D>,
        direction: Point<D>,
    },
}

impl<const D: usize> CircleGeom<D> {
    pub fn is_line(&self) -> bool {
        matches!(self, CircleGeom::Line { .. })
    }

    pub fn point_at(&self, phi: f64) -> Point<D> {
        match *self {
            CircleGeom::Circle { center, radius, u, v } => center + (u * phi.cos() + v * phi.sin()) * radius,
            CircleGeom::Line { point, direction } => point + direction * phi,
        }
    }

    /// Oriented unit tangent at a point of the circle.
    pub fn tangent_at(&self, p: &Point<D>) -> Point<D> {
        match *self {
            CircleGeom::Circle { center, u, v, .. } => {
                let d = p - center;
                let (c, s) = (d.dot(&u), d.dot(&v));
                (v * c - u * s).normalize()
            }
            CircleGeom::Line { direction, .. } => direction,
        }
    }
}

impl CircleGeom<3> {
    /// Unit normal of the oriented plane of the circle.
    pub fn normal(&self) -> Option<Vector3<f64>> {
        match self {
            CircleGeom::Circle { u, v, .. } => Some(u.cross(v)),
            CircleGeom::Line { .. } => None,
        }
    }
}

fn check_pair<const D: usize>(c: &Polyline<D>, i: usize, j: usize) -> Result<()> {
    let n = c.len();
    for k in [i, j] {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
    }
    if i == j {
        return Err(Error::SameIndex(i, j));
    }
    Ok(())
}

/// Circle through `x` tangent to `t` there and passing through `y`.
pub fn circle_through<const D: usize>(x: Point<D>, t: Point<D>, y: Point<D>) -> Result<CircleGeom<D>> {
    let d = y - x;
    let dn = d.norm();
    if dn == 0.0 {
        return Err(Error::CoincidentPoints(0.0));
    }
    let perp = d - t * d.dot(&t);
    let pn = perp.norm();
    if pn <= 1e-12 * dn {
        return Ok(CircleGeom::Line { point: x, direction: t });
    }
    let nrm = perp / pn;
    let radius = dn * dn / (2.0 * pn);
    Ok(CircleGeom::Circle {
        center: x + nrm * radius,
        radius,
        u: -nrm,
        v: t,
    })
}

/// The oriented circle tangent to the curve at vertex `i` passing through vertex `j`.
pub fn tangent_circle<const D: usize>(c: &Polyline<D>, i: usize, j: usize) -> Result<CircleGeom<D>> {
    check_pair(c, i, j)?;
    circle_through(c.vertex(i), c.tangent(i), c.vertex(j))
}

/// θ at `y` between the circle tangent to `tx` at `x` through `y` and the
/// direction `ty`.
pub fn angle_between<const D: usize>(x: Point<D>, tx: Point<D>, y: Point<D>, ty: Point<D>) -> Result<f64> {
    let d = y - x;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints(0.0));
    }
    let w = d / r;
    let reflected = w * (2.0 * tx.dot(&w)) - tx;
    let chord = (reflected - ty).norm();
    Ok((2.0 * (0.5 * chord).min(1.0).asin()).clamp(0.0, std::f64::consts::PI))
}

/// The conformal angle θ(x_i, x_j) ∈ [0, π].
pub fn conformal_angle<const D: usize>(c: &Polyline<D>, i: usize, j: usize) -> Result<f64> {
    check_pair(c, i, j)?;
    angle_between(c.vertex(i), c.tangent(i), c.vertex(j), c.tangent(j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossRatioSample {
    pub i: usize,
    pub j: usize,
    pub abs_density: f64,
    pub theta: f64,
    pub re_density: f64,
    pub im_density: f64,
}

impl CrossRatioSample {
    /// θ is so small that the imaginary part may not be smooth here.
    pub fn near_degenerate(&self) -> bool {
        self.theta < THETA_FLAG
    }
}

fn sample_from<const D: usize>(i: usize, x: Point<D>, tx: Point<D>, j: usize, y: Point<D>, ty: Point<D>) -> Result<CrossRatioSample> {
    let r2 = (y - x).norm_squared();
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints(0.0));
    }
    let theta = angle_between(x, tx, y, ty)?;
    let abs = 1.0 / r2;
    Ok(CrossRatioSample {
        i,
        j,
        abs_density: abs,
        theta,
        re_density: theta.cos() * abs,
        im_density: theta.sin() * abs,
    })
}

pub fn cross_ratio_sample<const D: usize>(c: &Polyline<D>, i: usize, j: usize) -> Result<CrossRatioSample> {
    check_pair(c, i, j)?;
    sample_from(i, c.vertex(i), c.tangent(i), j, c.vertex(j), c.tangent(j))
}

/// Sample between vertex `i` of `a` and vertex `j` of `b`.
pub fn cross_ratio_between<const D: usize>(a: &Polyline<D>, i: usize, b: &Polyline<D>, j: usize) -> Result<CrossRatioSample> {
    sample_from(i, a.vertex(i), a.tangent(i), j, b.vertex(j), b.tangent(j))
}

/// All samples (i, j), i ≠ j, with both indices multiples of `stride`, row-major.
pub fn cross_ratio_grid<const D: usize>(c: &Polyline<D>, stride: usize) -> Result<Vec<CrossRatioSample>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    let n = c.len();
    let tangents: Vec<Point<D>> = (0..n).map(|i| c.tangent(i)).collect();
    let verts = c.vertices();
    let rows: Vec<Result<Vec<CrossRatioSample>>> = (0..n)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            (0..n)
                .step_by(stride)
                .filter(|&j| j != i)
                .map(|j| sample_from(i, verts[i], tangents[i], j, verts[j], tangents[j]))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Σ (|Ω| − Re Ω) over a full (stride 1) grid, weighted by vertex weights.
pub fn energy_from_grid(c: &Polyline<3>, grid: &[CrossRatioSample]) -> f64 {
    let arcs = SmoothArcs::new(c);
    grid.iter()
        .map(|s| (s.abs_density - s.re_density) * arcs.weights[s.i] * arcs.weights[s.j])
        .sum()
}

/// The sphere (or plane) tangent to the curve at two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BitangentSphere {
    /// `orientation` is +1 when θ is measured with the outward normal.
    Sphere {
        center: Vector3<f64>,
        radius: f64,
        orientation: i8,
    },
    Plane {
        point: Vector3<f64>,
        normal: Vector3<f64>,
    },
    /// The two tangent circles coincide; every sphere through them qualifies.
    Degenerate,
}

pub fn bitangent_sphere(c: &Polyline<3>, i: usize, j: usize) -> Result<BitangentSphere> {
    check_pair(c, i, j)?;
    let (x, y) = (c.vertex(i), c.vertex(j));
    let (tx, ty) = (c.tangent(i), c.tangent(j));
    let d = y - x;
    let dn = d.normalize();
    let m = Matrix3::from_rows(&[tx.transpose(), ty.transpose(), dn.transpose()]);
    let det = m.determinant();
    if det.abs() > 1e-10 {
        let rhs = Vector3::new(tx.dot(&x), ty.dot(&y), dn.dot(&(x + y)) * 0.5);
        let center = m.lu().solve(&rhs).ok_or(Error::Degenerate("singular bitangent system"))?;
        let radius = (x - center).norm();
        let outward = (y - center) / radius;
        let reflected = dn * (2.0 * tx.dot(&dn)) - tx;
        let orientation = if reflected.cross(&ty).dot(&outward) >= 0.0 { 1 } else { -1 };
        return Ok(BitangentSphere::Sphere {
            center,
            radius,
            orientation,
        });
    }
    // tx, ty and the chord are coplanar
    let theta = angle_between(x, tx, y, ty)?;
    let candidates = [tx.cross(&dn), ty.cross(&dn), tx.cross(&ty)];
    let normal = candidates
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    if theta < 1e-9 || normal.norm() < 1e-10 {
        return Ok(BitangentSphere::Degenerate);
    }
    Ok(BitangentSphere::Plane {
        point: x,
        normal: normal.normalize(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::moebius::{apply_map, MoebiusMap, SphereInversion};
    use nalgebra::Vector3;

    /// Circle through three points, returned as (center, normal).
    fn fit(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let (u, w) = (b - a, c - a);
        let n = u.cross(&w);
        let center = a + (n.cross(&u) * w.norm_squared() + w.cross(&n) * u.norm_squared()) / (2.0 * n.norm_squared());
        (center, n.normalize())
    }

    #[test]
    fn circle_pairs_have_zero_angle() {
        let c = generators::circle(64, 1.0).unwrap();
        for (i, j) in [(0, 1), (0, 32), (5, 40), (63, 10)] {
            assert!(conformal_angle(&c, i, j).unwrap() < 1e-7);
            let s = cross_ratio_sample(&c, i, j).unwrap();
            let r2 = (c.vertex(i) - c.vertex(j)).norm_squared();
            assert!((s.abs_density - 1.0 / r2).abs() < 1e-12 / r2);
            assert!((s.re_density - s.abs_density).abs() < 1e-10 * s.abs_density);
            let circ = tangent_circle(&c, i, j).unwrap();
            if let CircleGeom::Circle { center, radius, .. } = circ {
                assert!(center.norm() < 1e-3 && (radius - 1.0).abs() < 1e-3);
            } else {
                panic!("expected a circle");
            }
        }
        assert!(matches!(conformal_angle(&c, 3, 3), Err(Error::SameIndex(..))));
    }

    #[test]
    fn tangent_circle_examples() {
        // tangent along x at the origin, through (0, 2, 0): the diameter is the chord
        let circ = circle_through(Vector3::zeros(), Vector3::x(), Vector3::new(0.0, 2.0, 0.0)).unwrap();
        match circ {
            CircleGeom::Circle { center, radius, .. } => {
                assert!((center - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
                assert!((radius - 1.0).abs() < 1e-15);
            }
            _ => panic!("expected a circle"),
        }
        let pts: Vec<_> = [0.3, 1.7, 4.0].iter().map(|&p| circ.point_at(p)).collect();
        let (center, normal) = fit(pts[0], pts[1], pts[2]);
        assert!((center - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((normal.cross(&Vector3::z())).norm() < 1e-12);
        assert!(circle_through(Vector3::zeros(), Vector3::x(), Vector3::new(3.0, 0.0, 0.0)).unwrap().is_line());
    }

    /// Oracle: build both circles from three-point fits and compare their tangents at y.
    fn two_circle_angle(x: Vector3<f64>, tx: Vector3<f64>, y: Vector3<f64>, ty: Vector3<f64>) -> f64 {
        let h = 1e-4;
        let c1 = circle_through(x, tx, y).unwrap();
        let c2 = circle_through(y, ty, x).unwrap();
        let sample = |c: &CircleGeom<3>| [c.point_at(0.0), c.point_at(1.0), c.point_at(2.5)];
        let [a, b, cc] = sample(&c1);
        let (center1, normal1) = fit(a, b, cc);
        let [a, b, cc] = sample(&c2);
        let (center2, normal2) = fit(a, b, cc);
        // tangent of circle 1 at y, oriented by moving along it from x
        let mut t1 = normal1.cross(&(y - center1)).normalize();
        let ahead = x + tx * h;
        let at_x = normal1.cross(&(x - center1)).normalize();
        if at_x.dot(&(ahead - x)) < 0.0 {
            t1 = -t1;
        }
        let mut t2 = normal2.cross(&(y - center2)).normalize();
        if t2.dot(&ty) < 0.0 {
            t2 = -t2;
        }
        t1.dot(&t2).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn reflection_formula_matches_two_circle_oracle() {
        let c = generators::figure_eight(200).unwrap();
        for (i, j) in [(0, 37), (10, 120), (50, 51), (80, 170), (33, 150)] {
            let theta = conformal_angle(&c, i, j).unwrap();
            let oracle = two_circle_angle(c.vertex(i), c.tangent(i), c.vertex(j), c.tangent(j));
            assert!((theta - oracle).abs() < 1e-6, "({i},{j}) {theta} {oracle}");
        }
        let t = generators::torus_knot(128, 2, 3).unwrap();
        for (i, j) in [(0, 37), (10, 100), (64, 3)] {
            let theta = conformal_angle(&t, i, j).unwrap();
            let oracle = two_circle_angle(t.vertex(i), t.tangent(i), t.vertex(j), t.tangent(j));
            assert!((theta - oracle).abs() < 1e-6, "({i},{j}) {theta} {oracle}");
        }
    }

    #[test]
    fn angle_is_symmetric_and_samples_are_consistent() {
        let c = generators::torus_knot(256, 2, 3).unwrap();
        let grid = cross_ratio_grid(&c, 7).unwrap();
        for s in &grid {
            assert!((0.0..=std::f64::consts::PI).contains(&s.theta));
            assert!(s.im_density >= 0.0);
            let pyth = s.re_density.powi(2) + s.im_density.powi(2);
            assert!((pyth - s.abs_density.powi(2)).abs() < 1e-10 * s.abs_density.powi(2));
            let back = conformal_angle(&c, s.j, s.i).unwrap();
            assert!((back - s.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_reproduces_energy() {
        let c = generators::torus_knot(256, 2, 3).unwrap();
        let grid = cross_ratio_grid(&c, 1).unwrap();
        assert_eq!(grid.len(), 256 * 255);
        let e = crate::energy::energy_alpha(&c, 2.0).unwrap().value;
        let g = energy_from_grid(&c, &grid);
        assert!((e - g).abs() < 1e-2 * e, "{e} {g}");
    }

    #[test]
    fn angle_is_order_s_squared_near_diagonal() {
        let c = generators::torus_knot(4096, 2, 3).unwrap();
        let l = c.total_length();
        let mut ratios = Vec::new();
        for k in [5usize, 8, 16, 41] {
            let s = c.arc_distance(100, 100 + k).unwrap();
            ratios.push(conformal_angle(&c, 100, 100 + k).unwrap() / (s / l).powi(2));
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi < 2.0 * lo, "{ratios:?}");
    }

    #[test]
    fn angle_and_density_are_inversion_invariant() {
        let c = generators::torus_knot(512, 2, 3).unwrap();
        let m = MoebiusMap::new(vec![SphereInversion::new(Vector3::new(0.5, 0.3, 1.5), 2.0).unwrap()]);
        let t = apply_map(&m, &c).unwrap();
        let (wa, wb) = (SmoothArcs::new(&c), SmoothArcs::new(&t));
        for (i, j) in [(0, 100), (30, 300), (200, 201), (400, 20)] {
            let a = cross_ratio_sample(&c, i, j).unwrap();
            let b = cross_ratio_sample(&t, i, j).unwrap();
            assert!((a.theta - b.theta).abs() < 1e-3, "{} {}", a.theta, b.theta);
            let da = a.abs_density * wa.weights[i] * wa.weights[j];
            let db = b.abs_density * wb.weights[i] * wb.weights[j];
            assert!((da - db).abs() < 1e-3 * da, "{da} {db}");
        }
    }

    fn on_sphere_residual(s: &BitangentSphere, circ: &CircleGeom<3>) -> f64 {
        let BitangentSphere::Sphere { center, radius, .. } = s else {
            panic!("expected a sphere");
        };
        (0..16)
            .map(|k| ((circ.point_at(k as f64 * 0.4) - center).norm() - radius).abs() / radius)
            .fold(0.0, f64::max)
    }

    #[test]
    fn bitangent_sphere_contains_both_circles() {
        let c = generators::torus_knot(256, 2, 3).unwrap();
        for (i, j) in [(0, 50), (17, 140), (200, 90)] {
            let s = bitangent_sphere(&c, i, j).unwrap();
            let c1 = tangent_circle(&c, i, j).unwrap();
            let c2 = tangent_circle(&c, j, i).unwrap();
            assert!(on_sphere_residual(&s, &c1) < 1e-9);
            assert!(on_sphere_residual(&s, &c2) < 1e-9);
        }
    }

    #[test]
    fn bitangent_sphere_degenerate_cases() {
        let e = generators::ellipse(128, 2.0, 1.0).unwrap();
        match bitangent_sphere(&e, 3, 50).unwrap() {
            BitangentSphere::Plane { normal, .. } => assert!(normal.cross(&Vector3::z()).norm() < 1e-12),
            other => panic!("expected the plane, got {other:?}"),
        }
        let c = generators::circle(64, 1.0).unwrap();
        assert_eq!(bitangent_sphere(&c, 0, 20).unwrap(), BitangentSphere::Degenerate);
    }
}
