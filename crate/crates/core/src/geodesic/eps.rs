//! ε-regularized geodesic segments in complex coordinates.
//!
//! For `n = 1` the regularized geodesic equation reduces to the real
//! Monge-Ampère problem `F_tt F_yy - F_ty² = ε·f₀''(y)` on `[0, T]×[-L, L]`
//! with `F(0, ·) = f₀`, `F(T, ·) = f₁` and the exact toric geodesic as data
//! on `y = ±L`. It is discretized by tensor Chebyshev collocation and solved
//! by damped Newton, continuing in `ε` from the exact geodesic.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::path::{GeodesicPath, PathKind};
use crate::error::{invalid, LabError, Result};
use crate::metric::legendre_point;

pub const EPS_NEWTON_MAX_ITER: usize = 60;

/// Interior residual accepted as converged.
pub const EPS_RESIDUAL_TOL: f64 = 1e-10;

/// Residual below which a stalled line search is still accepted.
pub const EPS_RESIDUAL_FLOOR: f64 = 1e-8;

/// Fillet width of the smoothed `max(0, x)` used for the convergence study;
/// collocation resolves it with [`EPS_NT`]×[`EPS_NY`] points.
pub const EPS_SEGMENT_DELTA: f64 = 0.1;
pub const EPS_HALF_WIDTH: f64 = 3.0;
pub const EPS_NT: usize = 17;
pub const EPS_NY: usize = 65;

#[derive(Debug, Clone)]
pub struct EpsGeodesicProblem {
    /// Segment joining the endpoints; its exact geodesic supplies the data on `y = ±L`.
    pub path: GeodesicPath,
    pub epsilon: f64,
    pub half_width: f64,
    /// Chebyshev points in `t` and `y`.
    pub nt: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsGeodesicSolution {
    pub epsilon: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// `values[(i, j)] = F(t_i, y_j)`.
    #[serde(skip)]
    pub values: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Smallest `F_yy` and `F_tt` over interior nodes.
    pub min_f_yy: f64,
    pub min_f_tt: f64,
}

/// Chebyshev points on `[a, b]` in increasing order and the differentiation matrix.
pub fn chebyshev(n: usize, a: f64, b: f64) -> (Vec<f64>, DMatrix<f64>) {
    let k = n - 1;
    let x: Vec<f64> = (0..n)
        .map(|j| -(std::f64::consts::PI * j as f64 / k as f64).cos())
        .collect();
    let weight = |j: usize| {
        let c = if j == 0 || j == k { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            c
        } else {
            -c
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[(i, j)] = weight(i) / weight(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|j| *j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    let scale = 2.0 / (b - a);
    let pts = x.iter().map(|v| a + (b - a) * (v + 1.0) / 2.0).collect();
    (pts, d * scale)
}

/// Exact geodesic `F(t, y)` and `f₀''(y)` on the tensor grid.
pub fn exact_geodesic(
    path: &GeodesicPath,
    t: &[f64],
    y: &[f64],
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if path.u0.dim() != 1 {
        return invalid("the regularized geodesic solver is implemented for n = 1 only");
    }
    let mut values = DMatrix::zeros(t.len(), y.len());
    let mut reference = vec![0.0; y.len()];
    for (i, &ti) in t.iter().enumerate() {
        let u = path.potential_at(ti);
        let mut guess = 0.0;
        for (j, &yj) in y.iter().enumerate() {
            let x = legendre_point(&u, yj, guess)?;
            guess = x;
            let jet = u.jet(&[x]);
            values[(i, j)] = x * yj - jet.value;
            if i == 0 {
                reference[j] = 1.0 / jet.hess[(0, 0)];
            }
        }
    }
    Ok((values, reference))
}

struct Operators {
    dt: DMatrix<f64>,
    dtt: DMatrix<f64>,
    dy: DMatrix<f64>,
    dyy: DMatrix<f64>,
}

impl Operators {
    /// `(F_tt, F_yy, F_ty)` on the full grid.
    fn derivatives(&self, f: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let ftt = &self.dtt * f;
        let fyy = f * self.dyy.transpose();
        let fty = &self.dt * f * self.dy.transpose();
        (ftt, fyy, fty)
    }
}

fn residual(
    ops: &Operators,
    f: &DMatrix<f64>,
    rhs: &[f64],
    epsilon: f64,
) -> (DVector<f64>, f64, f64) {
    let (nt, ny) = f.shape();
    let (ftt, fyy, fty) = ops.derivatives(f);
    let mut r = DVector::zeros((nt - 2) * (ny - 2));
    let (mut min_yy, mut min_tt) = (f64::INFINITY, f64::INFINITY);
    for i in 1..nt - 1 {
        for j in 1..ny - 1 {
            r[(i - 1) * (ny - 2) + j - 1] =
                ftt[(i, j)] * fyy[(i, j)] - fty[(i, j)].powi(2) - epsilon * rhs[j];
            min_yy = min_yy.min(fyy[(i, j)]);
            min_tt = min_tt.min(ftt[(i, j)]);
        }
    }
    (r, min_yy, min_tt)
}

fn jacobian(ops: &Operators, f: &DMatrix<f64>) -> DMatrix<f64> {
    let (nt, ny) = f.shape();
    let (ftt, fyy, fty) = ops.derivatives(f);
    let n = (nt - 2) * (ny - 2);
    let idx = |i: usize, j: usize| (i - 1) * (ny - 2) + j - 1;
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..nt - 1 {
        for j in 1..ny - 1 {
            let row = idx(i, j);
            for k in 1..nt - 1 {
                jac[(row, idx(k, j))] += fyy[(i, j)] * ops.dtt[(i, k)];
                for l in 1..ny - 1 {
                    jac[(row, idx(k, l))] -= 2.0 * fty[(i, j)] * ops.dt[(i, k)] * ops.dy[(j, l)];
                }
            }
            for l in 1..ny - 1 {
                jac[(row, idx(i, l))] += ftt[(i, j)] * ops.dyy[(j, l)];
            }
        }
    }
    jac
}

fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

impl EpsGeodesicProblem {
    pub fn new(
        path: GeodesicPath,
        epsilon: f64,
        half_width: f64,
        nt: usize,
        ny: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return invalid("epsilon must be strictly positive");
        }
        if !matches!(path.kind, PathKind::Segment { .. }) {
            return invalid("the regularized problem needs a segment");
        }
        if !(half_width > 0.0) || nt < 4 || ny < 4 {
            return invalid("grid needs a positive half width and at least 4 points per axis");
        }
        Ok(Self {
            path,
            epsilon,
            half_width,
            nt,
            ny,
        })
    }

    pub fn length(&self) -> f64 {
        match self.path.kind {
            PathKind::Segment { length } => length,
            PathKind::Ray => f64::INFINITY,
        }
    }

    pub fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let (t, _) = chebyshev(self.nt, 0.0, self.length());
        let (y, _) = chebyshev(self.ny, -self.half_width, self.half_width);
        (t, y)
    }

    fn operators(&self) -> Operators {
        let (_, dt) = chebyshev(self.nt, 0.0, self.length());
        let (_, dy) = chebyshev(self.ny, -self.half_width, self.half_width);
        Operators {
            dtt: &dt * &dt,
            dyy: &dy * &dy,
            dt,
            dy,
        }
    }
}

/// Damped Newton from `initial`, or from the exact geodesic when `None`.
/// Boundary values are always taken from the exact geodesic.
pub fn eps_geodesic_solve(
    problem: &EpsGeodesicProblem,
    initial: Option<&DMatrix<f64>>,
) -> Result<EpsGeodesicSolution> {
    let (t, y) = problem.grid();
    let (exact, rhs) = exact_geodesic(&problem.path, &t, &y)?;
    let ops = problem.operators();
    let (nt, ny) = (problem.nt, problem.ny);
    let mut f = exact.clone();
    if let Some(init) = initial {
        if init.shape() != (nt, ny) {
            return invalid("initial guess has the wrong shape");
        }
        for i in 1..nt - 1 {
            for j in 1..ny - 1 {
                f[(i, j)] = init[(i, j)];
            }
        }
    }
    let eps = problem.epsilon;
    let (mut r, mut min_yy, mut min_tt) = residual(&ops, &f, &rhs, eps);
    let mut norm = norm_inf(&r);
    let mut iterations = 0;
    while norm > EPS_RESIDUAL_TOL && iterations < EPS_NEWTON_MAX_ITER {
        iterations += 1;
        let jac = jacobian(&ops, &f);
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| LabError::ConvergenceFailure {
                context: "regularized geodesic Newton (singular Jacobian)".into(),
                iterations,
                residual: norm,
                best: Vec::new(),
            })?;
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = f.clone();
            for i in 1..nt - 1 {
                for j in 1..ny - 1 {
                    trial[(i, j)] += s * step[(i - 1) * (ny - 2) + j - 1];
                }
            }
            let (tr, ty, tt) = residual(&ops, &trial, &rhs, eps);
            let tn = norm_inf(&tr);
            if ty > 0.0 && tt > 0.0 && tn < norm {
                f = trial;
                r = tr;
                norm = tn;
                min_yy = ty;
                min_tt = tt;
                accepted = true;
                break;
            }
            s /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if norm > EPS_RESIDUAL_FLOOR || !(min_yy > 0.0) {
        return Err(LabError::ConvergenceFailure {
            context: format!("regularized geodesic Newton at epsilon = {eps}"),
            iterations,
            residual: norm,
            best: f.iter().copied().collect(),
        });
    }
    Ok(EpsGeodesicSolution {
        epsilon: eps,
        t,
        y,
        values: f,
        residual: norm,
        iterations,
        min_f_yy: min_yy,
        min_f_tt: min_tt,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsConvergence {
    pub epsilons: Vec<f64>,
    /// Sup distance to the exact geodesic on the mesh.
    pub errors: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log error` against `log ε`.
    pub loglog_slope: f64,
    pub strictly_decreasing: bool,
}

/// Solves for each `ε` in decreasing order, continuing from the previous solution.
pub fn eps_convergence(
    path: &GeodesicPath,
    epsilons: &[f64],
    half_width: f64,
    nt: usize,
    ny: usize,
) -> Result<EpsConvergence> {
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let mut errors = Vec::with_capacity(eps.len());
    let mut residuals = Vec::with_capacity(eps.len());
    let mut previous: Option<DMatrix<f64>> = None;
    for &e in &eps {
        let problem = EpsGeodesicProblem::new(path.clone(), e, half_width, nt, ny)?;
        let sol = eps_geodesic_solve(&problem, previous.as_ref())?;
        let (exact, _) = exact_geodesic(path, &sol.t, &sol.y)?;
        errors.push((&sol.values - exact).amax());
        residuals.push(sol.residual);
        previous = Some(sol.values);
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(EpsConvergence {
        strictly_decreasing: errors.windows(2).all(|w| w[1] < w[0]),
        loglog_slope: sxy / sxx,
        epsilons: eps,
        errors,
        residuals,
    })
}
