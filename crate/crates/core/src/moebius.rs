//! Inversions in spheres, their compositions, and the lifts
//! R³ ∪ {∞} → S³ ⊂ R⁴ → light cone of R⁵₁.
//!
//! Stereographic convention: the pole (0,0,0,1) of S³ projects to ∞ and
//! S³ projects onto the equatorial R³.

use nalgebra::{Vector3, Vector4};

use crate::curve::{PolyCurve, SphereCurve};
use crate::error::{Error, Result};
use crate::minkowski::MinkVector;

/// Distance below which a vertex is considered to sit on an inversion centre.
const CENTER_EPS: f64 = 1e-12;

/// A point of R³ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtPoint {
    Finite(Vector3<f64>),
    Infinity,
}

impl ExtPoint {
    pub fn finite(self) -> Option<Vector3<f64>> {
        match self {
            ExtPoint::Finite(p) => Some(p),
            ExtPoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtPoint::Infinity)
    }
}

impl From<Vector3<f64>> for ExtPoint {
    fn from(p: Vector3<f64>) -> Self {
        ExtPoint::Finite(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereInversion {
    pub center: Vector3<f64>,
    pub radius: f64,
}

impl SphereInversion {
    pub fn new(center: Vector3<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inversion radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }
}

impl std::str::FromStr for SphereInversion {
    type Err = Error;

    /// Parses `cx,cy,cz,r`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("inversion '{s}': {e}")))?;
        if parts.len() != 4 {
            return Err(Error::InvalidParameter(format!(
                "inversion '{s}' needs 4 comma-separated numbers"
            )));
        }
        Self::new(Vector3::new(parts[0], parts[1], parts[2]), parts[3])
    }
}

/// Image of `p` under inversion: on the ray from the centre with |CP|·|CP'| = r².
pub fn invert_point(inv: &SphereInversion, p: ExtPoint) -> ExtPoint {
    match p {
        ExtPoint::Infinity => ExtPoint::Finite(inv.center),
        ExtPoint::Finite(p) => {
            let d = p - inv.center;
            let d2 = d.norm_squared();
            if d2 == 0.0 {
                ExtPoint::Infinity
            } else {
                ExtPoint::Finite(inv.center + d * (inv.radius * inv.radius / d2))
            }
        }
    }
}

/// A composition of sphere inversions, applied first to last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoebiusMap {
    pub inversions: Vec<SphereInversion>,
}

impl MoebiusMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(inversions: Vec<SphereInversion>) -> Self {
        Self { inversions }
    }

    /// `outer ∘ inner`: apply `inner` first.
    pub fn compose(outer: &MoebiusMap, inner: &MoebiusMap) -> MoebiusMap {
        let mut inversions = inner.inversions.clone();
        inversions.extend_from_slice(&outer.inversions);
        MoebiusMap { inversions }
    }

    pub fn apply_point(&self, p: ExtPoint) -> ExtPoint {
        self.inversions.iter().fold(p, |q, inv| invert_point(inv, q))
    }
}

/// Applies `m` vertexwise. Fails if any vertex reaches an inversion centre.
pub fn apply_map(m: &MoebiusMap, c: &PolyCurve) -> Result<PolyCurve> {
    let mut verts = c.vertices().to_vec();
    for inv in &m.inversions {
        let scale = inv.radius.max(1.0);
        for v in verts.iter_mut() {
            let d = *v - inv.center;
            if d.norm() < CENTER_EPS * scale {
                return Err(Error::PointAtInfinity);
            }
            *v = inv.center + d * (inv.radius * inv.radius / d.norm_squared());
        }
    }
    PolyCurve::new(verts, c.is_closed())
}

/// Inverse stereographic projection R³ ∪ {∞} → S³.
pub fn lift_to_sphere(p: ExtPoint) -> Vector4<f64> {
    match p {
        ExtPoint::Infinity => Vector4::new(0.0, 0.0, 0.0, 1.0),
        ExtPoint::Finite(p) => {
            let r2 = p.norm_squared();
            let s = 1.0 / (r2 + 1.0);
            Vector4::new(2.0 * p.x * s, 2.0 * p.y * s, 2.0 * p.z * s, (r2 - 1.0) * s)
        }
    }
}

/// Stereographic projection S³ → R³ ∪ {∞} from the pole (0,0,0,1).
pub fn project_to_r3(q: &Vector4<f64>) -> ExtPoint {
    let denom = 1.0 - q.w;
    if denom <= 0.0 {
        ExtPoint::Infinity
    } else {
        ExtPoint::Finite(Vector3::new(q.x, q.y, q.z) / denom)
    }
}

pub fn lift_curve_to_sphere(c: &PolyCurve) -> Result<SphereCurve> {
    c.map(|v| lift_to_sphere(ExtPoint::Finite(*v)))
}

/// (1, q) on the light cone of R⁵₁ for a unit vector q.
pub fn light_cone_lift(q: &Vector4<f64>) -> Result<MinkVector> {
    let norm = q.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::OffSphere(norm));
    }
    Ok(MinkVector::new(vec![1.0, q.x, q.y, q.z, q.w]))
}
