//! Discrete curves: ordered vertex lists with an arclength table.
//!
//! A [`Polyline`] is generic over the ambient dimension so the same type
//! carries knots in R³ ([`PolyCurve`]) and their lifts to S³ ⊂ R⁴
//! ([`SphereCurve`]). Curves are immutable after construction.

use nalgebra::SVector;

use crate::error::{Error, Result};

/// Minimum vertex count accepted by energy evaluation.
pub const MIN_ENERGY_VERTICES: usize = 8;

/// Three points whose turning angle has |sin| below this are treated as collinear.
const COLLINEAR_EPS: f64 = 1e-12;

pub type Point<const D: usize> = SVector<f64, D>;

/// A closed or open polygonal curve in R^D.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<const D: usize> {
    vertices: Vec<Point<D>>,
    closed: bool,
    /// Cumulative arclength at each vertex; for closed curves one extra
    /// entry holds the total length.
    arclen: Vec<f64>,
}

/// A discrete knot in R³.
pub type PolyCurve = Polyline<3>;
/// A discrete knot on S³ ⊂ R⁴.
pub type SphereCurve = Polyline<4>;

impl<const D: usize> Polyline<D> {
    pub fn new(vertices: Vec<Point<D>>, closed: bool) -> Result<Self> {
        let needed = if closed { 3 } else { 2 };
        if vertices.len() < needed {
            return Err(Error::TooFewVertices {
                needed,
                got: vertices.len(),
            });
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        let n = vertices.len();
        let segs = if closed { n } else { n - 1 };
        let mut arclen = Vec::with_capacity(segs + 1);
        arclen.push(0.0);
        let mut acc = 0.0;
        for k in 0..segs {
            let next = (k + 1) % n;
            let l = (vertices[next] - vertices[k]).norm();
            if l <= 0.0 {
                return Err(Error::DegenerateSegment(k, next));
            }
            acc += l;
            arclen.push(acc);
        }
        Ok(Self {
            vertices,
            closed,
            arclen,
        })
    }

    pub fn closed(vertices: Vec<Point<D>>) -> Result<Self> {
        Self::new(vertices, true)
    }

    pub fn open(vertices: Vec<Point<D>>) -> Result<Self> {
        Self::new(vertices, false)
    }

    /// Samples `f` at `n` equally spaced parameters in [0, 2π) (closed) or [0, 1] (open).
    pub fn from_fn(n: usize, closed: bool, f: impl Fn(f64) -> Point<D>) -> Result<Self> {
        let verts = (0..n)
            .map(|k| {
                let t = if closed {
                    std::f64::consts::TAU * k as f64 / n as f64
                } else {
                    k as f64 / (n - 1).max(1) as f64
                };
                f(t)
            })
            .collect();
        Self::new(verts, closed)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn vertices(&self) -> &[Point<D>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point<D> {
        self.vertices[i]
    }

    pub fn into_vertices(self) -> Vec<Point<D>> {
        self.vertices
    }

    /// Cumulative arclength table; the last entry is the total length.
    pub fn arclength_table(&self) -> &[f64] {
        &self.arclen
    }

    pub fn segment_count(&self) -> usize {
        self.arclen.len() - 1
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        self.arclen[k + 1] - self.arclen[k]
    }

    pub fn total_length(&self) -> f64 {
        *self.arclen.last().expect("arclength table is never empty")
    }

    /// Vertex index `i + offset` with wraparound for closed curves.
    pub(crate) fn wrap(&self, i: isize) -> usize {
        let n = self.len() as isize;
        i.rem_euclid(n) as usize
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Shorter arclength between vertices `i` and `j` (no wraparound on open curves).
    pub fn arc_distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::SameIndex(i, j));
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let forward = self.arclen[hi] - self.arclen[lo];
        if self.closed {
            Ok(forward.min(self.total_length() - forward))
        } else {
            Ok(forward)
        }
    }

    /// Unit tangent at vertex `i`, taken from the circle through the vertex
    /// and its two neighbours (one-sided circle at the ends of open curves).
    pub fn tangent(&self, i: usize) -> Point<D> {
        let n = self.len();
        assert!(i < n, "vertex index {i} out of range for {n} vertices");
        if !self.closed && n == 2 {
            return (self.vertices[1] - self.vertices[0]).normalize();
        }
        if self.closed || (i > 0 && i + 1 < n) {
            let a = self.vertices[self.wrap(i as isize - 1)];
            let b = self.vertices[i];
            let c = self.vertices[self.wrap(i as isize + 1)];
            return circle_tangent_mid(a, b, c);
        }
        if i == 0 {
            circle_tangent_end(self.vertices[0], self.vertices[1], self.vertices[2])
        } else {
            -circle_tangent_end(
                self.vertices[n - 1],
                self.vertices[n - 2],
                self.vertices[n - 3],
            )
        }
    }

    /// Squared curvature of the circle through vertex `i` and its neighbours.
    /// Ends of open curves copy the value of the adjacent interior vertex.
    pub fn curvature_sq(&self, i: usize) -> f64 {
        let n = self.len();
        if !self.closed {
            if n < 3 {
                return 0.0;
            }
            let i = i.clamp(1, n - 2);
            return menger_curvature_sq(
                self.vertices[i - 1],
                self.vertices[i],
                self.vertices[i + 1],
            );
        }
        menger_curvature_sq(
            self.vertices[self.wrap(i as isize - 1)],
            self.vertices[i],
            self.vertices[self.wrap(i as isize + 1)],
        )
    }

    /// Applies `f` to every vertex, keeping closedness.
    pub fn map<const E: usize>(&self, f: impl Fn(&Point<D>) -> Point<E>) -> Result<Polyline<E>> {
        Polyline::new(self.vertices.iter().map(f).collect(), self.closed)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn translated(&self, by: &Point<D>) -> Result<Self> {
        self.map(|v| v + by)
    }

    pub fn centroid(&self) -> Point<D> {
        let sum = self.vertices.iter().fold(Point::<D>::zeros(), |acc, v| acc + v);
        sum / self.len() as f64
    }

    /// Smallest distance between two segments that share no vertex.
    /// Returns `None` if the curve has no such pair.
    pub fn min_self_distance(&self) -> Option<f64> {
        let segs = self.segment_count();
        let n = self.len();
        let mut best: Option<f64> = None;
        for a in 0..segs {
            for b in (a + 2)..segs {
                if self.closed && a == 0 && b == segs - 1 {
                    continue;
                }
                let d = segment_distance(
                    self.vertices[a],
                    self.vertices[(a + 1) % n],
                    self.vertices[b],
                    self.vertices[(b + 1) % n],
                );
                best = Some(best.map_or(d, |m: f64| m.min(d)));
            }
        }
        best
    }

    /// Resamples to `n` vertices with equal chord spacing along this polyline.
    ///
    /// Closed curves are then scaled about their centroid so the total
    /// length matches the input; open curves keep both endpoints.
    pub fn resample_uniform(&self, n: usize) -> Result<Self> {
        if n < MIN_ENERGY_VERTICES {
            return Err(Error::TooFewVertices {
                needed: MIN_ENERGY_VERTICES,
                got: n,
            });
        }
        let length = self.total_length();
        let steps = if self.closed { n } else { n - 1 };
        let target = length;

        let mut hi = length / steps as f64;
        let mut lo = 0.5 * hi;
        let mut guard = 0;
        while self.walk_position(lo, steps) >= target {
            lo *= 0.5;
            guard += 1;
            if guard > 60 {
                return Err(Error::Degenerate("equal-chord resampling failed to bracket"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.walk_position(mid, steps) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        let mut points = self.walk_points(h, if self.closed { n - 1 } else { n - 2 });
        if self.closed {
            let out = Self::closed(points)?;
            let factor = length / out.total_length();
            let c = out.centroid();
            out.map(|v| c + (v - c) * factor)
        } else {
            points.push(*self.vertices.last().expect("non-empty"));
            Self::open(points)
        }
    }

    /// Point at arclength position `s` (wrapping for closed curves, clamped otherwise).
    fn point_at(&self, seg: usize, t: f64) -> Point<D> {
        let n = self.len();
        let a = self.vertices[seg % n];
        let b = self.vertices[(seg + 1) % n];
        a + (b - a) * t
    }

    /// Advances from (`seg`, `t`) to the first later point at chord distance `h`.
    /// Returns `None` when an open curve runs out of segments, and stops after
    /// two laps on closed curves.
    fn next_crossing(&self, seg: usize, t: f64, h: f64) -> Option<(usize, f64)> {
        let origin = self.point_at(seg, t);
        let limit = if self.closed {
            2 * self.segment_count()
        } else {
            self.segment_count()
        };
        let mut k = seg;
        let mut t0 = t;
        while k < limit {
            let a = self.point_at(k, 0.0);
            let d = self.point_at(k, 1.0) - a;
            let e = a - origin;
            let qa = d.norm_squared();
            let qb = 2.0 * e.dot(&d);
            let qc = e.norm_squared() - h * h;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let root = (-qb + disc.sqrt()) / (2.0 * qa);
                if root >= t0 && root <= 1.0 {
                    return Some((k, root));
                }
            }
            k += 1;
            t0 = 0.0;
        }
        None
    }

    /// Arclength reached after `steps` chord steps of length `h` from vertex 0.
    fn walk_position(&self, h: f64, steps: usize) -> f64 {
        let (mut seg, mut t) = (0usize, 0.0);
        for _ in 0..steps {
            match self.next_crossing(seg, t, h) {
                Some((k, u)) => {
                    seg = k;
                    t = u;
                }
                None => return f64::INFINITY,
            }
        }
        let segs = self.segment_count();
        let lap = (seg / segs) as f64 * self.total_length();
        let local = seg % segs;
        lap + self.arclen[local] + t * self.segment_length(local)
    }

    fn walk_points(&self, h: f64, steps: usize) -> Vec<Point<D>> {
        let mut out = Vec::with_capacity(steps + 2);
        out.push(self.vertices[0]);
        let (mut seg, mut t) = (0usize, 0.0);
        for _ in 0..steps {
            match self.next_crossing(seg, t, h) {
                Some((k, u)) => {
                    seg = k;
                    t = u;
                    out.push(self.point_at(seg, t));
                }
                None => break,
            }
        }
        out
    }
}

/// A link: a list of pairwise disjoint closed components.
#[derive(Debug, Clone)]
pub struct LinkSet<const D: usize = 3> {
    components: Vec<Polyline<D>>,
}

impl<const D: usize> LinkSet<D> {
    pub fn new(components: Vec<Polyline<D>>) -> Result<Self> {
        if components.iter().any(|c| !c.is_closed()) {
            return Err(Error::Closedness { expected: "closed" });
        }
        for (a, ca) in components.iter().enumerate() {
            for cb in &components[a + 1..] {
                let d = min_distance_between(ca, cb);
                let scale = ca.total_length().max(cb.total_length());
                if d <= 1e-9 * scale {
                    return Err(Error::Intersecting(d));
                }
            }
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[Polyline<D>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Smallest segment-to-segment distance between two curves.
pub fn min_distance_between<const D: usize>(a: &Polyline<D>, b: &Polyline<D>) -> f64 {
    let na = a.len();
    let nb = b.len();
    let mut best = f64::INFINITY;
    for i in 0..a.segment_count() {
        for j in 0..b.segment_count() {
            let d = segment_distance(
                a.vertices[i],
                a.vertices[(i + 1) % na],
                b.vertices[j],
                b.vertices[(j + 1) % nb],
            );
            best = best.min(d);
        }
    }
    best
}

/// Unit tangent at `b` of the circle through `a`, `b`, `c`.
///
/// Inverting about `b` sends that circle to the line through the images of
/// `a` and `c`, which is parallel to the tangent at `b`.
pub(crate) fn circle_tangent_mid<const D: usize>(a: Point<D>, b: Point<D>, c: Point<D>) -> Point<D> {
    let u = b - a;
    let w = c - b;
    let uu = u.norm_squared();
    let ww = w.norm_squared();
    let cos = u.dot(&w) / (uu * ww).sqrt();
    if 1.0 - cos * cos < COLLINEAR_EPS * COLLINEAR_EPS {
        return (c - a).normalize();
    }
    (u / uu + w / ww).normalize()
}

/// Unit tangent at `a` of the circle through `a`, `b`, `c`, oriented toward `b`.
fn circle_tangent_end<const D: usize>(a: Point<D>, b: Point<D>, c: Point<D>) -> Point<D> {
    let u = b - a;
    let w = c - a;
    let uu = u.norm_squared();
    let ww = w.norm_squared();
    let cos = u.dot(&w) / (uu * ww).sqrt();
    if 1.0 - cos * cos < COLLINEAR_EPS * COLLINEAR_EPS {
        return u.normalize();
    }
    let d = u / uu - w / ww;
    let d = if d.dot(&u) < 0.0 { -d } else { d };
    d.normalize()
}

/// Squared curvature 4 sin²φ / |c − a|² of the circle through three points.
pub(crate) fn menger_curvature_sq<const D: usize>(a: Point<D>, b: Point<D>, c: Point<D>) -> f64 {
    let u = b - a;
    let w = c - b;
    let p = u.norm_squared();
    let q = w.norm_squared();
    let m = u.dot(&w);
    let e = p + q + 2.0 * m;
    (4.0 * (p * q - m * m) / (p * q * e)).max(0.0)
}

/// Euclidean distance between segments [p0, p1] and [q0, q1].
pub fn segment_distance<const D: usize>(p0: Point<D>, p1: Point<D>, q0: Point<D>, q1: Point<D>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
