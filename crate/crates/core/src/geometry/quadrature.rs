//! Interior quadrature on moment polytopes.
//!
//! Intervals use Gauss-Legendre. Polygons are fan-triangulated from the
//! barycenter and each triangle carries a collapsed (Duffy) tensor Gauss
//! rule, so no node ever touches the boundary where symplectic potentials
//! are log-singular.

use super::polytope::{clip_half_plane, polygon_area, Polytope};
use crate::error::{invalid, Result};

/// Quadrature nodes and positive weights on a polytope.
///
/// `order` is the number of Gauss points per direction on every cell; a rule
/// of order `n` integrates polynomials of total degree `2n - 2` exactly
/// (`2n - 1` on intervals).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrates `f` over the polytope; summation follows node order.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    /// `Σ w_i g(v_i)` over precomputed node values.
    pub fn integrate_values(&self, values: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * g(*v))
            .sum()
    }

    /// Weighted sum of precomputed node values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn interval_rule(lo: f64, hi: f64, n: usize, out: &mut QuadratureRule) {
    let (z, w) = gauss_legendre(n);
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    for (zi, wi) in z.iter().zip(&w) {
        out.nodes.push(vec![mid + half * zi]);
        out.weights.push(half * wi);
    }
}

fn triangle_rule(a: [f64; 2], b: [f64; 2], c: [f64; 2], n: usize, out: &mut QuadratureRule) {
    let (z, w) = gauss_legendre(n);
    let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for (zs, ws) in z.iter().zip(&w) {
        let s = (zs + 1.0) / 2.0;
        for (zr, wr) in z.iter().zip(&w) {
            let r = (zr + 1.0) / 2.0;
            let px = a[0] + s * ((1.0 - r) * (b[0] - a[0]) + r * (c[0] - a[0]));
            let py = a[1] + s * ((1.0 - r) * (b[1] - a[1]) + r * (c[1] - a[1]));
            out.nodes.push(vec![px, py]);
            out.weights.push(ws * wr / 4.0 * s * area2);
        }
    }
}

fn polygon_rule(poly: &[[f64; 2]], n: usize, out: &mut QuadratureRule) {
    if poly.len() < 3 || polygon_area(poly) <= 0.0 {
        return;
    }
    let k = poly.len() as f64;
    let center = [
        poly.iter().map(|p| p[0]).sum::<f64>() / k,
        poly.iter().map(|p| p[1]).sum::<f64>() / k,
    ];
    for i in 0..poly.len() {
        triangle_rule(center, poly[i], poly[(i + 1) % poly.len()], n, out);
    }
}

fn vertices2(p: &Polytope) -> Vec<[f64; 2]> {
    p.vertices.iter().map(|v| [v[0], v[1]]).collect()
}

/// Interior rule of the given order on `p`.
pub fn quadrature(p: &Polytope, order: usize) -> Result<QuadratureRule> {
    if order < 1 {
        return invalid("quadrature order must be >= 1");
    }
    let mut rule = QuadratureRule {
        dim: p.dim,
        nodes: Vec::new(),
        weights: Vec::new(),
        order,
    };
    match p.dim {
        1 => {
            let (lo, hi) = p.interval();
            interval_rule(lo, hi, order, &mut rule);
        }
        2 => {
            // fan from the barycenter
            let b = p.barycenter();
            let v = vertices2(p);
            for i in 0..v.len() {
                triangle_rule([b[0], b[1]], v[i], v[(i + 1) % v.len()], order, &mut rule);
            }
        }
        d => return invalid(format!("dimension {d} not supported")),
    }
    Ok(rule)
}

/// Breakpoints `0, ±width, ±2 width, ±4 width, ...` clipped to `(lo, hi)`.
fn graded_breaks(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        cuts.push(0.0);
    }
    let mut s = width;
    while s < hi.max(-lo) {
        for c in [s, -s] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        s *= 2.0;
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    cuts
}

/// Rule refined around the hyperplane `<a, x> + b = 0`.
///
/// The polytope is cut into slabs `s_j <= <a, x> + b <= s_{j+1}` whose widths
/// grow geometrically from `width`; every slab gets a rule of the given
/// order. Used for smoothed piecewise-linear directions whose Hessian lives
/// on a band of that width.
pub fn graded_quadrature(
    p: &Polytope,
    order: usize,
    a: &[f64],
    b: f64,
    width: f64,
) -> Result<QuadratureRule> {
    if order < 1 {
        return invalid("quadrature order must be >= 1");
    }
    if width <= 0.0 || !width.is_finite() {
        return invalid("grading width must be positive");
    }
    let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return quadrature(p, order);
    }
    let (lo, hi) = p.affine_range(a, b);
    let breaks = graded_breaks(lo, hi, width);
    let mut rule = QuadratureRule {
        dim: p.dim,
        nodes: Vec::new(),
        weights: Vec::new(),
        order,
    };
    match p.dim {
        1 => {
            // s = a x + b  =>  x = (s - b) / a
            let mut xs: Vec<f64> = breaks.iter().map(|s| (s - b) / a[0]).collect();
            xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
            for w in xs.windows(2) {
                interval_rule(w[0], w[1], order, &mut rule);
            }
        }
        _ => {
            let v = vertices2(p);
            for w in breaks.windows(2) {
                let slab = clip_half_plane(&v, [a[0], a[1]], b - w[0]);
                let slab = clip_half_plane(&slab, [-a[0], -a[1]], w[1] - b);
                polygon_rule(&slab, order, &mut rule);
            }
        }
    }
    Ok(rule)
}

/// `(∫_P e^{<b,x>} dx, ∫_P x e^{<b,x>} dx)` with the given rule.
pub fn moments_with(rule: &QuadratureRule, b: &[f64]) -> (f64, Vec<f64>) {
    let mut mass = 0.0;
    let mut first = vec![0.0; rule.dim];
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let e = w * x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>().exp();
        mass += e;
        for (f, xi) in first.iter_mut().zip(x) {
            *f += e * xi;
        }
    }
    (mass, first)
}

/// Default order used by [`polytope_moments`].
pub const MOMENT_ORDER: usize = 24;

pub fn polytope_moments(p: &Polytope, b: &[f64]) -> Result<(f64, Vec<f64>)> {
    if b.len() != p.dim {
        return invalid("torus vector has wrong dimension");
    }
    let rule = quadrature(p, MOMENT_ORDER)?;
    Ok(moments_with(&rule, b))
}
