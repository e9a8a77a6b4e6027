//! Holomorphic invariants attached to the torus action: `H(ξ)`, the Futaki
//! invariant, its modified version, and the soliton field `ξ₀`.
//!
//! Hamiltonians of torus vectors are affine on the polytope,
//! `θ_ξ(x) = <ξ, x> + c_ξ`, normalized by `∫_M e^{θ_ξ} ωⁿ = V`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::geometry::{build_model, polytope_moments, quadrature, ModelName, QuadratureRule};
use crate::metric::field::{grad_pairing, log_integral_exp, NodeField, SampledMetric};
use crate::metric::{catalog_metrics, SymplecticPotential};

/// An element of the torus Lie algebra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusVector {
    pub components: Vec<f64>,
}

impl TorusVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self { components }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == 0.0)
    }

    pub fn linear(&self, x: &[f64]) -> f64 {
        self.components.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `c_ξ = log vol(P) - log ∫_P e^{<ξ,x>} dλ` on the given rule.
    pub fn normalization(&self, rule: &QuadratureRule) -> Result<f64> {
        if self.dim() != rule.dim {
            return invalid("torus vector has wrong dimension");
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let lin: Vec<f64> = rule.nodes.iter().map(|x| self.linear(x)).collect();
        Ok(rule.total_weight().ln() - log_integral_exp(rule, &lin)?)
    }

    /// Normalized Hamiltonian `θ_ξ` at the rule nodes.
    pub fn theta(&self, rule: &QuadratureRule) -> Result<Vec<f64>> {
        let c = self.normalization(rule)?;
        Ok(rule.nodes.iter().map(|x| self.linear(x) + c).collect())
    }
}

/// `H(ξ) = ∫_M θ_ξ e^h ωⁿ`.
pub fn h_invariant(s: &SampledMetric, xi: &TorusVector) -> Result<f64> {
    Ok(s.integrate_weighted(&xi.theta(s.rule())?))
}

/// The Futaki invariant computed two independent ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FutakiValues {
    /// `∫ θ_ξ e^h ωⁿ - ∫ θ_ξ ωⁿ`
    pub measure: f64,
    /// `∫ <∇θ_ξ, ∇h> ωⁿ`
    pub gradient: f64,
}

/// `∫ θ (e^h - 1) ωⁿ` for arbitrary node values `θ`.
pub fn futaki_measure_of(s: &SampledMetric, theta: &[f64]) -> f64 {
    s.integrate_weighted(theta) - s.integrate(theta)
}

pub fn futaki(s: &SampledMetric, xi: &TorusVector) -> Result<FutakiValues> {
    let theta = xi.theta(s.rule())?;
    let measure = futaki_measure_of(s, &theta);
    let grad = DVector::from_column_slice(&xi.components);
    let a = NodeField {
        values: theta,
        grads: vec![grad; s.field.len()],
    };
    let b = NodeField {
        values: s.ricci.h.clone(),
        grads: s.field.ricci_gradient(),
    };
    let gradient = s.integrate(&grad_pairing(&a, &b, &s.field)?);
    Ok(FutakiValues { measure, gradient })
}

/// `F_X(ξ) = ∫ θ_ξ (e^h - e^{θ_X}) ωⁿ`.
pub fn modified_futaki(s: &SampledMetric, xi: &TorusVector, x: &TorusVector) -> Result<f64> {
    let theta = xi.theta(s.rule())?;
    let theta_x = x.theta(s.rule())?;
    let e_x: Vec<f64> = theta
        .iter()
        .zip(&theta_x)
        .map(|(t, q)| t * q.exp())
        .collect();
    Ok(s.integrate_weighted(&theta) - s.integrate(&e_x))
}

/// Right side of `F_X(ξ) = F(ξ) - ∫ θ_ξ (e^{θ_X} - 1) ωⁿ`.
pub fn modified_futaki_relation(
    s: &SampledMetric,
    xi: &TorusVector,
    x: &TorusVector,
) -> Result<f64> {
    let f = futaki(s, xi)?.measure;
    let theta = xi.theta(s.rule())?;
    let theta_x = x.theta(s.rule())?;
    let g: Vec<f64> = theta
        .iter()
        .zip(&theta_x)
        .map(|(t, q)| t * q.exp_m1())
        .collect();
    Ok(f - s.integrate(&g))
}

/// `∫_P x e^h dλ / vol(P)` for one sampled metric.
pub fn first_moment(s: &SampledMetric) -> Vec<f64> {
    let dim = s.rule().dim;
    let e = s.exp_h();
    let vol = s.polytope_volume();
    (0..dim)
        .map(|i| {
            let g: Vec<f64> = s
                .rule()
                .nodes
                .iter()
                .zip(&e)
                .map(|(x, w)| x[i] * w)
                .collect();
            s.field.rule.sum(&g) / vol
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    pub beta: Vec<f64>,
    /// Same moment for a perturbed catalog metric.
    pub check: Vec<f64>,
    pub agreement: f64,
}

/// The first moment of `e^h dλ`, from the reference metric, cross-checked
/// against a perturbed catalog metric.
pub fn beta_vector(model: ModelName, order: usize) -> Result<BetaReport> {
    let rule = quadrature(&build_model(model), order)?;
    let reference = SampledMetric::new(&SymplecticPotential::reference(model), &rule)?;
    let perturbed = SampledMetric::new(&catalog_metrics(model)[2], &rule)?;
    let beta = first_moment(&reference);
    let check = first_moment(&perturbed);
    let agreement = beta
        .iter()
        .zip(&check)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(BetaReport {
        beta,
        check,
        agreement,
    })
}

/// Mass, first and second moments of `e^{<ξ,x>} dλ`.
fn weighted_moments(rule: &QuadratureRule, xi: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let dim = rule.dim;
    let shift = rule
        .nodes
        .iter()
        .map(|x| xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut m0 = 0.0;
    let mut m1 = DVector::zeros(dim);
    let mut m2 = DMatrix::zeros(dim, dim);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let e = w * (xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - shift).exp();
        let xv = DVector::from_column_slice(x);
        m0 += e;
        m1 += &xv * e;
        m2 += &xv * xv.transpose() * e;
    }
    (m0, m1, m2)
}

/// Newton iteration cap for both soliton-field routes.
pub const EXTREMAL_MAX_ITER: usize = 100;

/// Solves `∫ x e^{<ξ,x>} / ∫ e^{<ξ,x>} = β` by Newton with the covariance
/// of the weighted measure as Jacobian.
pub fn solve_barycenter(rule: &QuadratureRule, beta: &[f64]) -> Result<(Vec<f64>, usize)> {
    let dim = rule.dim;
    let target = DVector::from_column_slice(beta);
    let mut xi = DVector::zeros(dim);
    let mut last = f64::INFINITY;
    for it in 0..EXTREMAL_MAX_ITER {
        let (m0, m1, m2) = weighted_moments(rule, xi.as_slice());
        let mean = &m1 / m0;
        let r = &mean - &target;
        last = r.norm();
        if last < 1e-14 {
            return Ok((xi.as_slice().to_vec(), it));
        }
        let cov = &m2 / m0 - &mean * mean.transpose();
        let step = cov
            .lu()
            .solve(&r)
            .ok_or_else(|| LabError::ConvergenceFailure {
                context: "barycenter Newton: singular covariance".into(),
                iterations: it,
                residual: last,
                best: xi.as_slice().to_vec(),
            })?;
        // cap the step so the weights never overflow
        let scale = (5.0 / step.norm()).min(1.0);
        xi -= step * scale;
    }
    Err(LabError::ConvergenceFailure {
        context: "barycenter Newton".into(),
        iterations: EXTREMAL_MAX_ITER,
        residual: last,
        best: xi.as_slice().to_vec(),
    })
}

/// Gradient and Hessian of a smooth function by Richardson-extrapolated
/// central differences.
fn fd_derivatives(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = x.len();
    let at = |d: &[(usize, f64)]| -> Result<f64> {
        let mut p = x.to_vec();
        for (i, s) in d {
            p[*i] += s;
        }
        f(&p)
    };
    let f0 = f(x)?;
    let mut g = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let d1 = |s: f64| -> Result<f64> { Ok((at(&[(i, s)])? - at(&[(i, -s)])?) / (2.0 * s)) };
        let d2 =
            |s: f64| -> Result<f64> { Ok((at(&[(i, s)])? - 2.0 * f0 + at(&[(i, -s)])?) / (s * s)) };
        g[i] = (4.0 * d1(h / 2.0)? - d1(h)?) / 3.0;
        hess[(i, i)] = (4.0 * d2(h / 2.0)? - d2(h)?) / 3.0;
        for j in 0..i {
            let mixed = |s: f64| -> Result<f64> {
                Ok(
                    (at(&[(i, s), (j, s)])? - at(&[(i, s), (j, -s)])? - at(&[(i, -s), (j, s)])?
                        + at(&[(i, -s), (j, -s)])?)
                        / (4.0 * s * s),
                )
            };
            let v = (4.0 * mixed(h / 2.0)? - mixed(h)?) / 3.0;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((g, hess))
}

/// Maximizes a concave function by damped Newton with finite-difference
/// derivatives and backtracking on the objective.
pub fn maximize_concave(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    start: &[f64],
    fd_step: f64,
    tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let mut x = start.to_vec();
    let mut fx = f(&x)?;
    let mut gnorm = f64::INFINITY;
    for it in 0..EXTREMAL_MAX_ITER {
        let (g, hess) = fd_derivatives(f, &x, fd_step)?;
        gnorm = g.norm();
        if gnorm < tol {
            return Ok((x, it));
        }
        // Newton step if the Hessian is negative definite, gradient ascent otherwise
        let neg = -&hess;
        let dir = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + s * d).collect();
            if let Ok(ft) = f(&trial) {
                if ft >= fx - 1e-14 * fx.abs().max(1.0) {
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            s /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Err(LabError::ConvergenceFailure {
        context: "damped Newton maximization".into(),
        iterations: EXTREMAL_MAX_ITER,
        residual: gnorm,
        best: x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalField {
    pub xi0: TorusVector,
    /// Maximizer of `H` found by damped Newton.
    pub optimizer_route: Vec<f64>,
    /// Root of the weighted-barycenter equation.
    pub barycenter_route: Vec<f64>,
    pub route_gap: f64,
    pub optimizer_iterations: usize,
    pub barycenter_iterations: usize,
}

/// The maximizer `ξ₀` of `ξ ↦ H(ξ)`, computed by both routes on the
/// reference metric. The barycenter route is returned as `xi0`.
pub fn extremal_field(model: ModelName, order: usize) -> Result<ExtremalField> {
    let rule = quadrature(&build_model(model), order)?;
    let s = SampledMetric::new(&SymplecticPotential::reference(model), &rule)?;
    let beta = first_moment(&s);
    let (bary, bary_it) = solve_barycenter(&rule, &beta)?;
    let v = s.volume();
    let objective = |xi: &[f64]| h_invariant(&s, &TorusVector::new(xi.to_vec())).map(|h| h / v);
    let (opt, opt_it) = maximize_concave(&objective, &vec![0.0; rule.dim], 1e-2, 1e-11)?;
    let route_gap = opt
        .iter()
        .zip(&bary)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ExtremalField {
        xi0: TorusVector::new(bary.clone()),
        optimizer_route: opt,
        barycenter_route: bary,
        route_gap,
        optimizer_iterations: opt_it,
        barycenter_iterations: bary_it,
    })
}

/// Weighted barycenter of `e^{<ξ,x>} dλ` on the default moment rule.
pub fn weighted_barycenter(model: ModelName, xi: &[f64]) -> Result<Vec<f64>> {
    let p = build_model(model);
    let (m, first) = polytope_moments(&p, xi)?;
    Ok(first.iter().map(|f| f / m).collect())
}
