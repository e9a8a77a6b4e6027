//! Legendre duality between symplectic potentials on `P = [-1, 1]` and
//! Kähler potentials `f(y)` in logarithmic coordinates `y = log|z|²`.

use super::potential::SymplecticPotential;
use crate::error::{invalid, LabError, Result};

const INNER_MAX_ITER: usize = 50;

/// Maximizer `x*` of `x·y - u(x)` over the interior of the interval.
///
/// Safeguarded Newton: the bracket `(lo, hi)` shrinks with the sign of
/// `y - u'(x)`, and any step leaving it is replaced by bisection.
pub fn legendre_point(u: &SymplecticPotential, y: f64, guess: f64) -> Result<f64> {
    if u.dim() != 1 {
        return invalid("Legendre duality is implemented for n = 1 only");
    }
    let (end_lo, end_hi) = u.model.polytope.interval();
    let (mut lo, mut hi) = (end_lo, end_hi);
    let mut x = guess.clamp(lo + 1e-300, hi - 1e-300);
    if !(x > lo && x < hi) {
        x = (lo + hi) / 2.0;
    }
    let mut last = f64::INFINITY;
    for _ in 0..INNER_MAX_ITER {
        let j = u.jet(&[x]);
        let g = y - j.grad[0];
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x + g / j.hess[(0, 0)];
        if !(next >= lo && next <= hi && next > end_lo && next < end_hi) {
            next = 0.5 * (lo + hi);
        }
        let moved = (next - x).abs();
        x = next;
        last = g.abs();
        if moved <= 4.0 * f64::EPSILON * (1.0 + x.abs()) || g == 0.0 {
            return Ok(x);
        }
    }
    Err(LabError::ConvergenceFailure {
        context: format!("Legendre inner problem at y = {y}"),
        iterations: INNER_MAX_ITER,
        residual: last,
        best: vec![x],
    })
}

/// Kähler potential on a uniform grid over `[-L, L]`, with exact first and
/// second derivatives at the nodes (`f' = x*`, `f'' = 1/u''(x*)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPotential {
    pub half_width: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub d2f: Vec<f64>,
}

/// Minimum number of grid points.
pub const MIN_GRID: usize = 16;

pub fn uniform_grid(half_width: f64, m: usize) -> Vec<f64> {
    let dy = 2.0 * half_width / (m - 1) as f64;
    (0..m).map(|i| -half_width + i as f64 * dy).collect()
}

/// `f(y) = sup_x (x y - u(x))` on `m` uniform points of `[-L, L]`.
pub fn legendre_dual(
    u: &SymplecticPotential,
    half_width: f64,
    m: usize,
) -> Result<ComplexPotential> {
    if u.dim() != 1 {
        return invalid("Legendre duality is implemented for n = 1 only");
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return invalid("L must be positive");
    }
    if m < MIN_GRID {
        return invalid(format!("grid needs at least {MIN_GRID} points"));
    }
    let y = uniform_grid(half_width, m);
    let (mut f, mut df, mut d2f) = (
        Vec::with_capacity(m),
        Vec::with_capacity(m),
        Vec::with_capacity(m),
    );
    let mut guess = (y[0] / 2.0).tanh();
    for &yi in &y {
        let x = legendre_point(u, yi, guess)?;
        let j = u.jet(&[x]);
        f.push(u.dual_value(&[x]) + x * (yi - j.grad[0]));
        df.push(x);
        d2f.push(1.0 / j.hess[(0, 0)]);
        guess = x;
    }
    Ok(ComplexPotential {
        half_width,
        y,
        f,
        df,
        d2f,
    })
}

/// Coefficients of the quintic Hermite interpolant on `[0, 1]`.
fn quintic(f0: f64, d0: f64, s0: f64, f1: f64, d1: f64, s1: f64, h: f64) -> [f64; 6] {
    let c0 = f0;
    let c1 = h * d0;
    let c2 = h * h * s0 / 2.0;
    let a = f1 - (c0 + c1 + c2);
    let b = h * d1 - (c1 + 2.0 * c2);
    let c = h * h * s1 - 2.0 * c2;
    [
        c0,
        c1,
        c2,
        10.0 * a - 4.0 * b + c / 2.0,
        -15.0 * a + 7.0 * b - c,
        6.0 * a - 3.0 * b + c / 2.0,
    ]
}

impl ComplexPotential {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    /// `(f, f', f'')` at any `y` in `[-L, L]` by quintic Hermite interpolation.
    pub fn eval(&self, y: f64) -> (f64, f64, f64) {
        let h = self.spacing();
        let k = (((y - self.y[0]) / h).floor() as isize).clamp(0, self.len() as isize - 2) as usize;
        let c = quintic(
            self.f[k],
            self.df[k],
            self.d2f[k],
            self.f[k + 1],
            self.df[k + 1],
            self.d2f[k + 1],
            h,
        );
        let t = (y - self.y[k]) / h;
        let v = c.iter().rev().fold(0.0, |acc, ci| acc * t + ci);
        let d = (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1];
        let s = ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2];
        (v, d / h, s / (h * h))
    }

    /// `sup_y (x y - f(y))`, the inverse transform at `x`, searched over the grid.
    /// Requires `x` inside the range of `f'` on the grid.
    pub fn dualize_back(&self, x: f64) -> Result<f64> {
        let n = self.len();
        if !(x > self.df[0] && x < self.df[n - 1]) {
            return invalid(format!("x = {x} is outside the slope range of the grid"));
        }
        let k = self.df.partition_point(|&d| d <= x).saturating_sub(1);
        let (mut lo, mut hi) = (self.y[k], self.y[k + 1]);
        let mut y = 0.5 * (lo + hi);
        for _ in 0..INNER_MAX_ITER {
            let (_, d, s) = self.eval(y);
            let g = x - d;
            if g > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let mut next = y + g / s;
            if !(next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            let moved = (next - y).abs();
            y = next;
            if moved < 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(x * y - self.eval(y).0)
    }

    /// Strict convexity and slopes inside the open interval `(-1, 1)`.
    pub fn is_valid(&self) -> bool {
        let n = self.len();
        let second_diff_ok =
            (1..n - 1).all(|i| self.f[i + 1] - 2.0 * self.f[i] + self.f[i - 1] > 0.0);
        second_diff_ok && self.df.iter().all(|d| d.abs() < 1.0) && self.d2f.iter().all(|s| *s > 0.0)
    }
}

/// Largest `|f*(x) - u(x)|` over `probes` after dualizing `u` on the grid and back.
pub fn roundtrip_error(
    u: &SymplecticPotential,
    half_width: f64,
    m: usize,
    probes: &[f64],
) -> Result<f64> {
    let f = legendre_dual(u, half_width, m)?;
    probes.iter().try_fold(0.0f64, |acc, &x| {
        Ok(acc.max((f.dualize_back(x)? - u.jet(&[x]).value).abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{quadrature, ModelName};
    use crate::metric::potential::MetricSpec;

    #[test]
    fn reference_dual_is_log_cosh() {
        let u = SymplecticPotential::reference(ModelName::Cp1);
        let f = legendre_dual(&u, 10.0, 512).unwrap();
        let err =
            f.y.iter()
                .zip(&f.f)
                .map(|(y, v)| (v - 2.0 * (y / 2.0).cosh().ln()).abs())
                .fold(0.0f64, f64::max);
        assert!(err < 1e-8, "max error {err}");
        assert!(f.is_valid());
    }

    #[test]
    fn roundtrip_and_gradient_consistency() {
        let u = SymplecticPotential::new(MetricSpec::bubble(ModelName::Cp1, vec![0.1])).unwrap();
        let f = legendre_dual(&u, 10.0, 512).unwrap();
        let rule = quadrature(&u.model.polytope, 32).unwrap();
        for x in rule.nodes.iter().map(|x| x[0]) {
            let back = f.dualize_back(x).unwrap();
            assert!((back - u.jet(&[x]).value).abs() < 1e-8);
            if x.abs() < 0.95 {
                let y = u.jet(&[x]).grad[0];
                assert!((f.eval(y).1 - x).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let u = SymplecticPotential::reference(ModelName::Cp1);
        assert!(legendre_dual(&u, 0.0, 512).is_err());
        assert!(legendre_dual(&u, 10.0, 8).is_err());
        let f1 = SymplecticPotential::reference(ModelName::Hirzebruch1);
        assert!(legendre_dual(&f1, 10.0, 64).is_err());
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let p = |y: f64| 0.3 * y.powi(5) - y.powi(3) + 2.0 * y;
        let dp = |y: f64| 1.5 * y.powi(4) - 3.0 * y * y + 2.0;
        let sp = |y: f64| 6.0 * y.powi(3) - 6.0 * y;
        let y = uniform_grid(2.0, 17);
        let cp = ComplexPotential {
            half_width: 2.0,
            f: y.iter().map(|&v| p(v)).collect(),
            df: y.iter().map(|&v| dp(v)).collect(),
            d2f: y.iter().map(|&v| sp(v)).collect(),
            y,
        };
        for &t in &[-1.93, -0.2, 0.71, 1.999] {
            let (v, d, s) = cp.eval(t);
            assert!((v - p(t)).abs() < 1e-12);
            assert!((d - dp(t)).abs() < 1e-11);
            assert!((s - sp(t)).abs() < 1e-9);
        }
    }
}
