//! Quadrature support shared by the double-integral evaluators.
//!
//! Vertices are treated as samples of a smooth curve at uniform parameter
//! spacing. Segment chords are lifted to arclengths of the osculating circle,
//! vertex weights are trapezoid weights in the sampling parameter, and the
//! omitted diagonal of a renormalized double sum is restored with a
//! generalized Euler–Maclaurin (Navot) correction.

use crate::curve::Polyline;

/// Arclength data of the smooth curve interpolating a polyline.
#[derive(Debug, Clone)]
pub struct SmoothArcs {
    /// Arclength of each segment.
    pub arcs: Vec<f64>,
    /// Arclength position of each vertex; `positions[0] = 0`.
    pub positions: Vec<f64>,
    /// Trapezoid weight of each vertex.
    pub weights: Vec<f64>,
    /// Squared curvature at each vertex.
    pub curvature_sq: Vec<f64>,
    pub total: f64,
    pub closed: bool,
}

impl SmoothArcs {
    pub fn new<const D: usize>(c: &Polyline<D>) -> Self {
        let n = c.len();
        let curvature_sq: Vec<f64> = (0..n).map(|i| c.curvature_sq(i)).collect();
        let segs = c.segment_count();
        let arcs: Vec<f64> = (0..segs)
            .map(|k| {
                let l = c.segment_length(k);
                let mean_sq = 0.5 * (curvature_sq[k] + curvature_sq[(k + 1) % n]);
                chord_to_arc(l, mean_sq)
            })
            .collect();
        let mut positions = Vec::with_capacity(n);
        let mut acc = 0.0;
        for k in 0..n {
            positions.push(acc);
            if k < segs {
                acc += arcs[k];
            }
        }
        let total: f64 = arcs.iter().sum();
        let weights = (0..n)
            .map(|i| {
                if c.is_closed() {
                    0.5 * (arcs[(i + n - 1) % n] + arcs[i])
                } else if i == 0 {
                    0.5 * arcs[0]
                } else if i == n - 1 {
                    0.5 * arcs[segs - 1]
                } else {
                    0.5 * (arcs[i - 1] + arcs[i])
                }
            })
            .collect();
        Self {
            arcs,
            positions,
            weights,
            curvature_sq,
            total,
            closed: c.is_closed(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Arc distance between vertices, shorter way round on closed curves.
    #[inline]
    pub fn arc_distance(&self, i: usize, j: usize) -> f64 {
        let d = (self.positions[j] - self.positions[i]).abs();
        if self.closed {
            d.min(self.total - d)
        } else {
            d
        }
    }

    /// Signed arclength offset from vertex `i` to vertex `i + k` along the curve.
    pub fn offset(&self, i: usize, k: isize) -> f64 {
        let n = self.len() as isize;
        let j = (i as isize + k).rem_euclid(n) as usize;
        let mut d = self.positions[j] - self.positions[i];
        if self.closed {
            if k > 0 && d <= 0.0 {
                d += self.total;
            } else if k < 0 && d >= 0.0 {
                d -= self.total;
            }
        }
        d
    }
}

/// Arclength of a circular arc with chord `l` and squared curvature `k2`,
/// to fourth order in `l`.
#[inline]
pub fn chord_to_arc(l: f64, k2: f64) -> f64 {
    l + k2 * l * l * l / 24.0
}

/// Coefficient multiplying `w^(3-alpha) * c` in the diagonal correction of a
/// row sum whose integrand behaves like `c |s|^(2-alpha)` near `s = 0`.
pub fn diagonal_factor(alpha: f64) -> f64 {
    -2.0 * riemann_zeta(alpha - 2.0)
}

/// Riemann zeta function for real `s != 1` by Euler–Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!((s - 1.0).abs() > 1e-12, "zeta has a pole at s = 1");
    // B_{2k} / (2k)!
    const B_OVER_FACT: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
    ];
    let n = 12usize;
    let nf = n as f64;
    let mut sum: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * nf.powf(-s);
    // rising factorial s (s+1) ... (s+2k-2) times n^(-s-2k+1)
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (k, b) in B_OVER_FACT.iter().enumerate() {
        sum += b * rising * power;
        let m = 2 * k as i32 + 1;
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        power /= nf * nf;
    }
    sum
}

/// Weights of the derivative at 0 of the Lagrange interpolant through `nodes`.
pub fn derivative_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    (0..m)
        .map(|a| {
            let denom: f64 = (0..m)
                .filter(|&b| b != a)
                .map(|b| nodes[a] - nodes[b])
                .product();
            let numer: f64 = (0..m)
                .filter(|&b| b != a)
                .map(|b| {
                    (0..m)
                        .filter(|&k| k != a && k != b)
                        .map(|k| -nodes[k])
                        .product::<f64>()
                })
                .sum();
            numer / denom
        })
        .collect()
}
