//! A symplectic potential sampled on a quadrature rule, and the Ricci
//! potential `h` of the metric it defines.
//!
//! In moment coordinates `h = log det D²u - (<x,∇u> - u) + c`, with `c`
//! fixed by `∫_P e^h dλ = vol(P)`. For invariant functions the metric pairing
//! is `<∇a, ∇b> = Daᵀ (D²u)⁻¹ Db` and the Laplacian is `∂_i (u^{ij} ∂_j)`.

use nalgebra::{DMatrix, DVector};

use super::potential::{degenerate, min_eigenvalue, SymplecticPotential};
use crate::error::{invalid, LabError, Result};
use crate::geometry::QuadratureRule;

#[derive(Debug, Clone)]
pub struct NodeSample {
    pub hess: DMatrix<f64>,
    pub hess_inv: DMatrix<f64>,
    pub log_det: f64,
    /// `<x, ∇u> - u`
    pub dual: f64,
}

/// Potential plus its per-node geometric data on a fixed rule.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub potential: SymplecticPotential,
    pub rule: QuadratureRule,
    pub samples: Vec<NodeSample>,
}

/// Ricci potential values at the rule nodes, with their normalization constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciPotential {
    pub h: Vec<f64>,
    pub c: f64,
}

/// Node values together with gradients, the input of [`grad_pairing`].
#[derive(Debug, Clone)]
pub struct NodeField {
    pub values: Vec<f64>,
    pub grads: Vec<DVector<f64>>,
}

impl NodeField {
    /// Samples an invariant function given by a closure returning (value, gradient).
    pub fn sample(rule: &QuadratureRule, mut f: impl FnMut(&[f64]) -> (f64, DVector<f64>)) -> Self {
        let (values, grads) = rule.nodes.iter().map(|x| f(x)).unzip();
        Self { values, grads }
    }
}

impl MetricField {
    pub fn new(potential: &SymplecticPotential, rule: &QuadratureRule) -> Result<Self> {
        if rule.dim != potential.dim() {
            return invalid("rule dimension does not match the model");
        }
        let mut samples = Vec::with_capacity(rule.len());
        for (i, x) in rule.nodes.iter().enumerate() {
            let jet = potential.jet(x);
            let lam = min_eigenvalue(&jet.hess);
            if !(lam > 0.0) {
                return Err(degenerate(i, lam));
            }
            let hess_inv = jet
                .hess
                .clone()
                .try_inverse()
                .ok_or_else(|| degenerate(i, lam))?;
            let log_det = jet.hess.determinant().ln();
            samples.push(NodeSample {
                hess: jet.hess,
                hess_inv,
                log_det,
                dual: potential.dual_value(x),
            });
        }
        Ok(Self {
            potential: potential.clone(),
            rule: rule.clone(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `log det D²u - (<x,∇u> - u)` before normalization; equals `h - c`.
    pub fn unnormalized_h(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_det - s.dual).collect()
    }

    /// `∫_P e^{h - c} dλ`, the pullback of `∫ e^{-f} dy` to the polytope.
    pub fn log_partition(&self) -> Result<f64> {
        log_integral_exp(&self.rule, &self.unnormalized_h())
    }

    /// `u^{ij} ∂_j h = -∂_j u^{ij} - x_i` at every node (needs third derivatives).
    pub fn ricci_flux(&self) -> Vec<DVector<f64>> {
        let dim = self.potential.dim();
        self.rule
            .nodes
            .iter()
            .zip(&self.samples)
            .map(|(x, s)| {
                let (d3, _) = self.potential.higher(x);
                let b = &s.hess_inv;
                // ∂_l B = -B (∂_l A) B, summed against column index l
                let mut div = DVector::zeros(dim);
                for (l, d3l) in d3.iter().enumerate() {
                    let db = -(b * d3l * b);
                    for i in 0..dim {
                        div[i] += db[(i, l)];
                    }
                }
                -div - DVector::from_column_slice(x)
            })
            .collect()
    }

    /// `∇h` at every node.
    pub fn ricci_gradient(&self) -> Vec<DVector<f64>> {
        self.ricci_flux()
            .into_iter()
            .zip(&self.samples)
            .map(|(g, s)| &s.hess * g)
            .collect()
    }

    /// `Δh = ∂_i (u^{ij} ∂_j h) = -∂_i ∂_l u^{il} - n` (needs fourth derivatives).
    pub fn ricci_laplacian(&self) -> Vec<f64> {
        let dim = self.potential.dim();
        self.rule
            .nodes
            .iter()
            .zip(&self.samples)
            .map(|(x, s)| {
                let (d3, d4) = self.potential.higher(x);
                let b = &s.hess_inv;
                let mut acc = 0.0;
                for i in 0..dim {
                    for l in 0..dim {
                        let m = b * &d3[i] * b * &d3[l] * b + b * &d3[l] * b * &d3[i] * b
                            - b * &d4[i][l] * b;
                        acc += m[(i, l)];
                    }
                }
                -acc - dim as f64
            })
            .collect()
    }
}

/// `log ∫ e^{g} dλ` by a shifted sum; errors when the result is not finite.
pub(crate) fn log_integral_exp(rule: &QuadratureRule, g: &[f64]) -> Result<f64> {
    let shift = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(LabError::NumericalOverflow(
            "exponent is not finite at some node".into(),
        ));
    }
    let s: f64 = g
        .iter()
        .zip(&rule.weights)
        .map(|(v, w)| w * (v - shift).exp())
        .sum();
    let out = shift + s.ln();
    if out.is_finite() {
        Ok(out)
    } else {
        Err(LabError::NumericalOverflow(
            "normalization integral is not finite".into(),
        ))
    }
}

/// The normalized Ricci potential of the sampled metric.
pub fn ricci_potential(field: &MetricField) -> Result<RicciPotential> {
    let raw = field.unnormalized_h();
    let vol = field.rule.total_weight();
    let c = vol.ln() - log_integral_exp(&field.rule, &raw)?;
    Ok(RicciPotential {
        h: raw.into_iter().map(|v| v + c).collect(),
        c,
    })
}

/// A metric field together with its Ricci potential; the common input of
/// every functional and invariant.
#[derive(Debug, Clone)]
pub struct SampledMetric {
    pub field: MetricField,
    pub ricci: RicciPotential,
}

impl SampledMetric {
    pub fn new(u: &SymplecticPotential, rule: &QuadratureRule) -> Result<Self> {
        let field = MetricField::new(u, rule)?;
        let ricci = ricci_potential(&field)?;
        Ok(Self { field, ricci })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.field.rule
    }

    pub fn c_n(&self) -> f64 {
        self.field.potential.model.c_n
    }

    /// `V = C_n · vol(P)`.
    pub fn volume(&self) -> f64 {
        self.field.potential.model.volume
    }

    /// `vol(P)` as seen by the rule.
    pub fn polytope_volume(&self) -> f64 {
        self.field.rule.total_weight()
    }

    /// `e^h` at the nodes.
    pub fn exp_h(&self) -> Vec<f64> {
        self.ricci.h.iter().map(|v| v.exp()).collect()
    }

    /// `C_n ∫_P g e^h dλ` for node values `g`.
    pub fn integrate_weighted(&self, g: &[f64]) -> f64 {
        let w: Vec<f64> = g
            .iter()
            .zip(&self.ricci.h)
            .map(|(a, h)| a * h.exp())
            .collect();
        self.c_n() * self.field.rule.sum(&w)
    }

    /// `C_n ∫_P g dλ` for node values `g`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.c_n() * self.field.rule.sum(g)
    }
}

/// Pointwise `Daᵀ (D²u)⁻¹ Db`.
/// Node dump with columns `x` (one per coordinate), `u`, `h`.
pub fn grid_csv(s: &SampledMetric) -> String {
    let dim = s.rule().dim;
    let mut out: String = if dim == 1 { "x".into() } else { "x1,x2".into() };
    out.push_str(",u,h\n");
    for (i, x) in s.rule().nodes.iter().enumerate() {
        for c in x {
            out.push_str(&format!("{c:e},"));
        }
        out.push_str(&format!(
            "{:e},{:e}\n",
            s.field.potential.jet(x).value,
            s.ricci.h[i]
        ));
    }
    out
}

pub fn grad_pairing(a: &NodeField, b: &NodeField, field: &MetricField) -> Result<Vec<f64>> {
    let n = field.len();
    if a.values.len() != n || b.values.len() != n || a.grads.len() != n || b.grads.len() != n {
        return invalid("node fields do not live on the metric's rule");
    }
    Ok(a.grads
        .iter()
        .zip(&b.grads)
        .zip(&field.samples)
        .map(|((ga, gb), s)| (ga.transpose() * &s.hess_inv * gb)[(0, 0)])
        .collect())
}
