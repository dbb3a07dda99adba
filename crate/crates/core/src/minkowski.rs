//! Exterior algebra over the Minkowski space R^{n+2}_1 (index 0 timelike).
//!
//! Blades are stored as Plücker coordinates over lexicographically sorted
//! multi-indices. Oriented q-spheres in Sⁿ are unit-pseudonorm decomposable
//! blades of grade q + 2.

use nalgebra::{DMatrix, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::PolyCurve;
use crate::error::{Error, Result};
use crate::moebius::{lift_to_sphere, light_cone_lift};
use crate::quadrature::{derivative_weights, SmoothArcs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkVector {
    coords: Vec<f64>,
}

impl MinkVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[k] = 1.0;
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn apply(&self, a: &DMatrix<f64>) -> Result<MinkVector> {
        if a.ncols() != self.dim() || a.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.ncols(),
            });
        }
        Ok(MinkVector::new((0..self.dim()).map(|r| (0..self.dim()).map(|c| a[(r, c)] * self.coords[c]).sum()).collect()))
    }
}

/// −u₀v₀ + Σ u_k v_k.
pub fn mink_inner(u: &MinkVector, v: &MinkVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let spatial: f64 = u.coords[1..].iter().zip(&v.coords[1..]).map(|(a, b)| a * b).sum();
    Ok(spatial - u.coords[0] * v.coords[0])
}

/// Sorted `k`-subsets of `0..dim` in lexicographic order.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, dim: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            if dim - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, dim, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, dim, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Metric sign of each basis blade: +1 when the multi-index contains 0.
pub fn signature(dim: usize, k: usize) -> Vec<f64> {
    multi_indices(dim, k)
        .iter()
        .map(|idx| if idx[0] == 0 { 1.0 } else { -1.0 })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blade {
    pub q: usize,
    pub n: usize,
    pub coords: Vec<f64>,
}

impl Blade {
    pub fn new(q: usize, n: usize, coords: Vec<f64>) -> Result<Self> {
        if q > n {
            return Err(Error::InvalidParameter(format!("sphere dimension q = {q} exceeds n = {n}")));
        }
        let expected = binomial(n + 2, q + 2);
        if coords.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coords.len(),
            });
        }
        Ok(Self { q, n, coords })
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn grade(&self) -> usize {
        self.q + 2
    }

    pub fn legend(&self) -> Vec<Vec<usize>> {
        multi_indices(self.dim(), self.grade())
    }

    /// Coordinate for an arbitrary (unsorted) multi-index, with the
    /// alternating sign; zero if an index repeats.
    pub fn coord(&self, idx: &[usize]) -> f64 {
        let mut sorted = idx.to_vec();
        let mut sign = 1.0;
        for a in 0..sorted.len() {
            for b in 0..sorted.len() - 1 - a {
                if sorted[b] > sorted[b + 1] {
                    sorted.swap(b, b + 1);
                    sign = -sign;
                } else if sorted[b] == sorted[b + 1] {
                    return 0.0;
                }
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return 0.0;
        }
        sign * self.coords[rank(&sorted, self.dim())]
    }

    pub fn scaled(&self, s: f64) -> Blade {
        Blade {
            q: self.q,
            n: self.n,
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Lexicographic position of a sorted multi-index among all subsets of its size.
fn rank(idx: &[usize], dim: usize) -> usize {
    let k = idx.len();
    let mut r = 0;
    let mut prev = 0;
    for (pos, &i) in idx.iter().enumerate() {
        for skipped in prev..i {
            r += binomial(dim - skipped - 1, k - pos - 1);
        }
        prev = i + 1;
    }
    r
}

fn check_vectors(vectors: &[MinkVector]) -> Result<(usize, usize)> {
    let k = vectors.len();
    let dim = vectors.first().map(|v| v.dim()).unwrap_or(0);
    if k < 2 || dim < k {
        return Err(Error::InvalidParameter(format!("cannot wedge {k} vectors of dimension {dim}")));
    }
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    Ok((k, dim))
}

fn lex_cmp(a: &MinkVector, b: &MinkVector) -> std::cmp::Ordering {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// All maximal minors of the matrix whose rows are `vectors`.
///
/// Rows are put in a canonical order first, so reordering the input changes
/// the result by an exact sign.
pub fn wedge(vectors: &[MinkVector]) -> Result<Blade> {
    let (k, dim) = check_vectors(vectors)?;
    let mut order: Vec<usize> = (0..k).collect();
    let mut sign = 1.0;
    for a in 0..k {
        for b in 0..k - 1 - a {
            match lex_cmp(&vectors[order[b]], &vectors[order[b + 1]]) {
                std::cmp::Ordering::Greater => {
                    order.swap(b, b + 1);
                    sign = -sign;
                }
                std::cmp::Ordering::Equal => return Blade::new(k - 2, dim - 2, vec![0.0; binomial(dim, k)]),
                std::cmp::Ordering::Less => {}
            }
        }
    }
    let coords = multi_indices(dim, k)
        .iter()
        .map(|cols| sign * DMatrix::from_fn(k, k, |r, c| vectors[order[r]].coords[cols[c]]).determinant())
        .collect();
    Blade::new(k - 2, dim - 2, coords)
}

fn check_shape(a: &Blade, b: &Blade) -> Result<()> {
    if a.q != b.q || a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.coords.len(),
            got: b.coords.len(),
        });
    }
    Ok(())
}

/// Coordinate form of the blade pseudo-inner product.
pub fn blade_inner(a: &Blade, b: &Blade) -> Result<f64> {
    check_shape(a, b)?;
    let sig = signature(a.dim(), a.grade());
    Ok(a.coords.iter().zip(&b.coords).zip(&sig).map(|((x, y), s)| s * x * y).sum())
}

/// Gram form: ⟨u₁∧⋯∧u_k, v₁∧⋯∧v_k⟩ = −det(⟨u_a, v_b⟩).
pub fn gram_inner(us: &[MinkVector], vs: &[MinkVector]) -> Result<f64> {
    check_vectors(us)?;
    check_vectors(vs)?;
    if us.len() != vs.len() {
        return Err(Error::DimensionMismatch {
            expected: us.len(),
            got: vs.len(),
        });
    }
    let k = us.len();
    let mut g = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            g[(a, b)] = mink_inner(&us[a], &vs[b])?;
        }
    }
    Ok(-g.determinant())
}

/// Largest Plücker relation residual, relative to the squared coordinate scale.
///
/// Checks every relation Σ_l (−1)^l p_{I ∪ j_l} p_{J ∖ j_l} = 0 over all
/// (k−1)-subsets I and (k+1)-subsets J.
pub fn plucker_residual(b: &Blade) -> f64 {
    let dim = b.dim();
    let k = b.grade();
    let scale = b.max_abs().powi(2);
    if scale == 0.0 {
        return 0.0;
    }
    let small = multi_indices(dim, k - 1);
    let large = multi_indices(dim, k + 1);
    let mut worst: f64 = 0.0;
    let mut left = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(k);
    for i in &small {
        for j in &large {
            let mut sum = 0.0;
            for l in 0..j.len() {
                left.clear();
                left.extend_from_slice(i);
                left.push(j[l]);
                right.clear();
                right.extend(j.iter().enumerate().filter(|(m, _)| *m != l).map(|(_, v)| *v));
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * b.coord(&left) * b.coord(&right);
            }
            worst = worst.max(sum.abs());
        }
    }
    worst / scale
}

/// A point of Θ(q, n): a unit-pseudonorm decomposable blade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereElem {
    pub blade: Blade,
}

impl SphereElem {
    pub fn new(blade: Blade) -> Result<Self> {
        let norm = blade_inner(&blade, &blade)?;
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("blade pseudonorm {norm} is not 1")));
        }
        let res = plucker_residual(&blade);
        if res > 1e-10 {
            return Err(Error::InvalidParameter(format!("Plücker residual {res:e} too large")));
        }
        Ok(Self { blade })
    }
}

/// Normalized wedge of a basis of a (q+2)-plane meeting the light cone transversally.
pub fn psi_g(vectors: &[MinkVector]) -> Result<SphereElem> {
    let p = wedge(vectors)?;
    let norm = blade_inner(&p, &p)?;
    if !(norm > 0.0) {
        return Err(Error::NotTransversal(norm));
    }
    Ok(SphereElem {
        blade: p.scaled(1.0 / norm.sqrt()),
    })
}

/// Matrix of (q+2)-minors of `a`, acting on Plücker coordinates.
pub fn psi_matrix(a: &DMatrix<f64>, q: usize, n: usize) -> Result<DMatrix<f64>> {
    let dim = n + 2;
    if a.nrows() != dim || a.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: a.nrows().max(a.ncols()),
        });
    }
    if q > n {
        return Err(Error::InvalidParameter(format!("sphere dimension q = {q} exceeds n = {n}")));
    }
    let k = q + 2;
    let idx = multi_indices(dim, k);
    let m = idx.len();
    Ok(DMatrix::from_fn(m, m, |r, c| {
        DMatrix::from_fn(k, k, |x, y| a[(idx[r][x], idx[c][y])]).determinant()
    }))
}

pub fn apply_psi(psi: &DMatrix<f64>, b: &Blade) -> Result<Blade> {
    if psi.ncols() != b.coords.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.ncols(),
            got: b.coords.len(),
        });
    }
    let v = psi * nalgebra::DVector::from_column_slice(&b.coords);
    Blade::new(b.q, b.n, v.iter().copied().collect())
}

/// The Minkowski metric diag(−1, 1, …, 1).
pub fn minkowski_metric(dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(dim, dim);
    m[(0, 0)] = -1.0;
    m
}

/// Hyperbolic boost in the (0, k) plane.
pub fn boost(dim: usize, k: usize, rapidity: f64) -> DMatrix<f64> {
    assert!(k >= 1 && k < dim, "boost axis {k} out of range");
    let mut m = DMatrix::identity(dim, dim);
    let (c, s) = (rapidity.cosh(), rapidity.sinh());
    m[(0, 0)] = c;
    m[(k, k)] = c;
    m[(0, k)] = s;
    m[(k, 0)] = s;
    m
}

/// Rotation in the spatial (a, b) plane.
pub fn rotation(dim: usize, a: usize, b: usize, angle: f64) -> DMatrix<f64> {
    assert!(a >= 1 && b >= 1 && a != b && a < dim && b < dim, "bad rotation plane");
    let mut m = DMatrix::identity(dim, dim);
    let (c, s) = (angle.cos(), angle.sin());
    m[(a, a)] = c;
    m[(b, b)] = c;
    m[(a, b)] = -s;
    m[(b, a)] = s;
    m
}

/// A product of random boosts and spatial rotations in O(dim − 1, 1).
pub fn random_lorentz(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::identity(dim, dim);
    for _ in 0..3 {
        let k = rng.random_range(1..dim);
        m = boost(dim, k, rng.random_range(-1.0..1.0)) * m;
        let a = rng.random_range(1..dim);
        let mut b = rng.random_range(1..dim);
        while b == a {
            b = rng.random_range(1..dim);
        }
        m = rotation(dim, a, b, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)) * m;
    }
    m
}

/// max |AᵀηA − η|.
pub fn lorentz_residual(a: &DMatrix<f64>) -> f64 {
    let eta = minkowski_metric(a.nrows());
    (a.transpose() * &eta * a - eta).amax()
}

/// max |ΨᵀJΨ − J| with J the blade metric.
pub fn pseudo_orthogonality_residual(psi: &DMatrix<f64>, q: usize, n: usize) -> f64 {
    let j = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(signature(n + 2, q + 2)));
    (psi.transpose() * &j * psi - j).amax()
}

/// An oriented round 2-sphere in S³: points at geodesic distance `radius`
/// from `center`, oriented by `orientation` = ±1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedSphere {
    pub center: Vector4<f64>,
    pub radius: f64,
    pub orientation: i8,
}

/// The de Sitter point σ with ⟨(1, x), σ⟩ = 0 exactly on the sphere.
pub fn desitter_from_sphere(s: &OrientedSphere) -> Result<MinkVector> {
    if !(s.radius > 0.0 && s.radius < std::f64::consts::PI) {
        return Err(Error::Degenerate("sphere radius must lie in (0, pi)"));
    }
    let norm = s.center.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::OffSphere(norm));
    }
    let sign = if s.orientation < 0 { -1.0 } else { 1.0 };
    let c = s.center / norm;
    let inv_sin = 1.0 / s.radius.sin();
    Ok(MinkVector::new(vec![
        sign * s.radius.cos() * inv_sin,
        sign * c.x * inv_sin,
        sign * c.y * inv_sin,
        sign * c.z * inv_sin,
        sign * c.w * inv_sin,
    ]))
}

/// Inverse of [`desitter_from_sphere`]. Returns the positively oriented
/// description; a negatively oriented sphere comes back as its antipodal
/// centre with complementary radius.
pub fn sphere_from_desitter(sigma: &MinkVector) -> Result<OrientedSphere> {
    if sigma.dim() != 5 {
        return Err(Error::DimensionMismatch {
            expected: 5,
            got: sigma.dim(),
        });
    }
    let norm = mink_inner(sigma, sigma)?;
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("<sigma, sigma> = {norm}, expected 1")));
    }
    let c = &sigma.coords;
    let spatial = Vector4::new(c[1], c[2], c[3], c[4]);
    let len = spatial.norm();
    Ok(OrientedSphere {
        center: spatial / len,
        radius: 1.0f64.atan2(c[0]),
        orientation: 1,
    })
}

fn complement(k: usize) -> Vec<usize> {
    (0..5).filter(|&i| i != k).collect()
}

/// 4-blade in R⁵₁ dual to the de Sitter vector σ.
pub fn sphere_blade_from_vector(sigma: &MinkVector) -> Result<Blade> {
    if sigma.dim() != 5 {
        return Err(Error::DimensionMismatch {
            expected: 5,
            got: sigma.dim(),
        });
    }
    let mut coords = vec![0.0; 5];
    for k in 0..5 {
        let idx = complement(k);
        let sig = if idx[0] == 0 { 1.0 } else { -1.0 };
        let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
        coords[rank(&idx, 5)] = sig * parity * sigma.coords[k];
    }
    Blade::new(2, 3, coords)
}

pub fn sphere_vector_from_blade(b: &Blade) -> Result<MinkVector> {
    if b.q != 2 || b.n != 3 {
        return Err(Error::InvalidParameter("expected a (q, n) = (2, 3) blade".into()));
    }
    Ok(MinkVector::new(
        (0..5)
            .map(|k| {
                let idx = complement(k);
                let sig = if idx[0] == 0 { 1.0 } else { -1.0 };
                let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
                sig * parity * b.coords[rank(&idx, 5)]
            })
            .collect(),
    ))
}

/// The point-pair sphere s(x, y) ∈ Θ(0, 3) of two distinct points of S³.
pub fn s_map(x: &Vector4<f64>, y: &Vector4<f64>) -> Result<SphereElem> {
    let gap = (x - y).norm();
    if gap < 1e-14 {
        return Err(Error::CoincidentPoints(gap));
    }
    psi_g(&[light_cone_lift(x)?, light_cone_lift(y)?])
}

fn s_coords(x: &Vector4<f64>, y: &Vector4<f64>) -> Result<Vec<f64>> {
    Ok(s_map(x, y)?.blade.coords)
}

/// Offsets used for the five-point derivative stencil.
const STENCIL: [isize; 5] = [-2, -1, 0, 1, 2];

/// Lagrange derivative of `f` at vertex `i` along curve `c`, in arclength.
fn stencil_derivative(
    arcs: &SmoothArcs,
    i: usize,
    f: impl Fn(usize) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let n = arcs.len();
    let nodes: Vec<f64> = STENCIL.iter().map(|&k| arcs.offset(i, k)).collect();
    let w = derivative_weights(&nodes);
    let mut out: Vec<f64> = Vec::new();
    for (&k, wk) in STENCIL.iter().zip(&w) {
        let j = (i as isize + k).rem_euclid(n as isize) as usize;
        let v = f(j)?;
        if out.is_empty() {
            out = vec![0.0; v.len()];
        }
        for (o, x) in out.iter_mut().zip(&v) {
            *o += wk * x;
        }
    }
    Ok(out)
}

/// Partial derivatives (s_x, s_y) of the point-pair map at vertex `i` of `a`
/// and vertex `j` of `b`, both curves lifted to S³ by inverse stereographic
/// projection and differentiated in the arclength of the original curves.
pub fn s_partials_pair(a: &PolyCurve, i: usize, b: &PolyCurve, j: usize) -> Result<(Blade, Blade)> {
    let (arcs_a, arcs_b) = (SmoothArcs::new(a), SmoothArcs::new(b));
    s_partials_with(a, &arcs_a, i, b, &arcs_b, j)
}

fn lifted(c: &PolyCurve, k: usize) -> Vector4<f64> {
    lift_to_sphere(c.vertex(k).into())
}

pub(crate) fn s_partials_with(
    a: &PolyCurve,
    arcs_a: &SmoothArcs,
    i: usize,
    b: &PolyCurve,
    arcs_b: &SmoothArcs,
    j: usize,
) -> Result<(Blade, Blade)> {
    if !a.is_closed() || !b.is_closed() {
        return Err(Error::Closedness { expected: "closed" });
    }
    let y = lifted(b, j);
    let x = lifted(a, i);
    let sx = stencil_derivative(arcs_a, i, |k| s_coords(&lifted(a, k), &y))?;
    let sy = stencil_derivative(arcs_b, j, |k| s_coords(&x, &lifted(b, k)))?;
    Ok((Blade::new(0, 3, sx)?, Blade::new(0, 3, sy)?))
}

fn check_stencil_gap(c: &PolyCurve, i: usize, j: usize) -> Result<()> {
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
    Ok(())
}

/// (s_x, s_y) for two vertices of one closed curve at cyclic index gap > 2.
pub fn s_partials(c: &PolyCurve, i: usize, j: usize) -> Result<(Blade, Blade)> {
    check_stencil_gap(c, i, j)?;
    s_partials_pair(c, i, c, j)
}

/// ⟨s_x, s_y⟩ at the vertex pair (i, j).
pub fn signed_area_density(c: &PolyCurve, i: usize, j: usize) -> Result<f64> {
    let (sx, sy) = s_partials(c, i, j)?;
    blade_inner(&sx, &sy)
}

/// Signed and absolute weighted sums of ⟨s_x, s_y⟩ over the product of two
/// link components.
pub fn signed_area_integral(a: &PolyCurve, b: &PolyCurve) -> Result<(f64, f64)> {
    use rayon::prelude::*;
    let (arcs_a, arcs_b) = (SmoothArcs::new(a), SmoothArcs::new(b));
    let rows: Vec<Result<(f64, f64)>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut signed = 0.0;
            let mut abs = 0.0;
            for j in 0..b.len() {
                let (sx, sy) = s_partials_with(a, &arcs_a, i, b, &arcs_b, j)?;
                let v = blade_inner(&sx, &sy)? * arcs_a.weights[i] * arcs_b.weights[j];
                signed += v;
                abs += v.abs();
            }
            Ok((signed, abs))
        })
        .collect();
    let mut total = (0.0, 0.0);
    for r in rows {
        let (s, a) = r?;
        total.0 += s;
        total.1 += a;
    }
    Ok(total)
}
