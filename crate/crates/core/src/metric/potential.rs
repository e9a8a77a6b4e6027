//! Torus-invariant Kähler metrics encoded by symplectic potentials
//! `u = u_ref + psi + Σ t_k v_k` on the moment polytope, where
//! `u_ref = Σ_k l_k log l_k` over the facet functions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::direction::Direction;
use super::model::ManifoldModel;
use crate::error::{invalid, LabError, Result};
use crate::geometry::{quadrature, ModelName, Poly, PolyJet};

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Serializable description of a catalog metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub model: ModelName,
    pub psi_catalog_id: String,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

/// Monomial exponents in graded order: `1, x, y, x², xy, y², ...`.
fn graded_exponents(dim: usize, count: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(count);
    let mut deg = 0u32;
    while out.len() < count {
        if dim == 1 {
            out.push((deg, 0));
        } else {
            for j in 0..=deg {
                if out.len() == count {
                    break;
                }
                out.push((deg - j, j));
            }
        }
        deg += 1;
    }
    out
}

impl MetricSpec {
    pub fn reference(model: ModelName) -> Self {
        Self {
            model,
            psi_catalog_id: "zero".into(),
            coefficients: vec![],
        }
    }

    pub fn bubble(model: ModelName, coefficients: Vec<f64>) -> Self {
        Self {
            model,
            psi_catalog_id: "bubble".into(),
            coefficients,
        }
    }

    /// Builds the perturbation polynomial.
    ///
    /// * `zero`: `psi = 0`.
    /// * `bubble`: `psi = Π_k l_k(x) · p(x)`, `p` with graded-monomial coefficients.
    /// * `poly`: `psi = p(x)` with graded-monomial coefficients.
    pub fn psi(&self, model: &ManifoldModel) -> Result<Poly> {
        let dim = model.n;
        let p = Poly::from_terms(
            graded_exponents(dim, self.coefficients.len())
                .into_iter()
                .zip(self.coefficients.iter().copied()),
        );
        match self.psi_catalog_id.as_str() {
            "zero" => {
                if !self.coefficients.is_empty() {
                    return invalid("catalog 'zero' takes no coefficients");
                }
                Ok(Poly::zero())
            }
            "bubble" => {
                let bump = (0..model.polytope.facet_count()).fold(Poly::constant(1.0), |acc, k| {
                    acc.mul(&Poly::affine(&model.polytope.normal_f64(k), 1.0))
                });
                Ok(bump.mul(&p))
            }
            "poly" => Ok(p),
            other => invalid(format!("unknown psi catalog id '{other}'")),
        }
    }
}

/// A symplectic potential. Cloning is cheap enough for per-`t` evaluation.
#[derive(Debug, Clone)]
pub struct SymplecticPotential {
    pub model: ManifoldModel,
    pub spec: MetricSpec,
    psi: PolyJet,
    directions: Vec<(f64, Direction)>,
    normals: Vec<DVector<f64>>,
}

impl SymplecticPotential {
    pub fn new(spec: MetricSpec) -> Result<Self> {
        let model = ManifoldModel::new(spec.model);
        let psi = spec.psi(&model)?;
        let normals = (0..model.polytope.facet_count())
            .map(|k| DVector::from_vec(model.polytope.normal_f64(k)))
            .collect();
        Ok(Self {
            psi: PolyJet::new(&psi, model.n),
            model,
            spec,
            directions: Vec::new(),
            normals,
        })
    }

    pub fn reference(model: ModelName) -> Self {
        Self::new(MetricSpec::reference(model)).expect("reference metric is valid")
    }

    /// Same potential plus `t · v`.
    pub fn with_direction(&self, t: f64, v: Direction) -> Self {
        let mut out = self.clone();
        if t != 0.0 {
            out.directions.push((t, v));
        }
        out
    }

    pub fn directions(&self) -> &[(f64, Direction)] {
        &self.directions
    }

    pub fn dim(&self) -> usize {
        self.model.n
    }

    pub fn facet_values(&self, x: &[f64]) -> Vec<f64> {
        self.model.polytope.facet_values(x)
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        let dim = self.dim();
        let mut value = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for (l, nu) in self.facet_values(x).into_iter().zip(&self.normals) {
            let ll = l.ln();
            value += l * ll;
            grad += nu * (ll + 1.0);
            hess += nu * nu.transpose() / l;
        }
        value += self.psi.value.eval(x);
        for i in 0..dim {
            grad[i] += self.psi.d1[i].eval(x);
            for j in 0..dim {
                hess[(i, j)] += self.psi.d2[i][j].eval(x);
            }
        }
        for (t, v) in &self.directions {
            let j = v.jet(x);
            value += t * j.value;
            grad += j.grad * *t;
            hess += j.hess * *t;
        }
        Jet { value, grad, hess }
    }

    /// `<x, ∇u(x)> - u(x)`, i.e. the Legendre dual evaluated at `y = ∇u(x)`.
    ///
    /// The reference part is summed as `Σ (l - 1 - log l)` which stays accurate
    /// next to the boundary.
    pub fn dual_value(&self, x: &[f64]) -> f64 {
        let mut out: f64 = self
            .facet_values(x)
            .into_iter()
            .map(|l| l - 1.0 - l.ln())
            .sum();
        let dot_grad = |g: &[f64]| x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
        let pg: Vec<f64> = self.psi.d1.iter().map(|p| p.eval(x)).collect();
        out += dot_grad(&pg) - self.psi.value.eval(x);
        for (t, v) in &self.directions {
            let j = v.jet(x);
            out += t * (dot_grad(j.grad.as_slice()) - j.value);
        }
        out
    }

    /// Third and fourth derivative tensors of `u` (see [`Direction::higher`]).
    pub fn higher(&self, x: &[f64]) -> (Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>) {
        let dim = self.dim();
        let mut d3 = vec![DMatrix::zeros(dim, dim); dim];
        let mut d4 = vec![vec![DMatrix::zeros(dim, dim); dim]; dim];
        for (l, nu) in self.facet_values(x).into_iter().zip(&self.normals) {
            let nn = nu * nu.transpose();
            for a in 0..dim {
                d3[a] -= &nn * (nu[a] / (l * l));
                for b in 0..dim {
                    d4[a][b] += &nn * (2.0 * nu[a] * nu[b] / (l * l * l));
                }
            }
        }
        for a in 0..dim {
            d3[a] += DMatrix::from_fn(dim, dim, |r, c| self.psi.d3[r][c][a].eval(x));
            for b in 0..dim {
                d4[a][b] += DMatrix::from_fn(dim, dim, |r, c| self.psi.d4[r][c][a][b].eval(x));
            }
        }
        for (t, v) in &self.directions {
            let (e3, e4) = v.higher(x);
            for a in 0..dim {
                d3[a] += &e3[a] * *t;
                for b in 0..dim {
                    d4[a][b] += &e4[a][b] * *t;
                }
            }
        }
        (d3, d4)
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mean = (a + c) / 2.0;
            let r = (((a - c) / 2.0).powi(2) + b * b).sqrt();
            // product form avoids cancellation when one eigenvalue dwarfs the other
            let big = mean + r;
            let det = a * c - b * b;
            if big > 0.0 {
                det / big
            } else {
                mean - r
            }
        }
        _ => m.clone().symmetric_eigenvalues().min(),
    }
}

/// Order of the rule used to certify convexity of generated catalog metrics.
const CERTIFY_ORDER: usize = 24;

/// Seeded random `bubble` metric with coefficients of total degree `<= 2`.
///
/// The amplitude is halved until the Hessian is positive definite (with
/// margin) on a fine rule, so every draw is a valid metric.
pub fn random_metric(model: ModelName, seed: u64, index: u64) -> SymplecticPotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    let dim = match model {
        ModelName::Cp1 => 1,
        ModelName::Hirzebruch1 => 2,
    };
    let count = if dim == 1 { 3 } else { 6 };
    let base_amp = if dim == 1 { 0.25 } else { 0.04 };
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut amp = base_amp;
    loop {
        let spec = MetricSpec::bubble(model, raw.iter().map(|c| c * amp).collect());
        let u = SymplecticPotential::new(spec).expect("bubble spec is valid");
        if certify_convex(&u, 0.2) {
            return u;
        }
        amp /= 2.0;
    }
}

/// True when `D²u - (1 - margin) · D²u_ref` stays positive definite on a fine rule.
fn certify_convex(u: &SymplecticPotential, margin: f64) -> bool {
    let rule = quadrature(&u.model.polytope, CERTIFY_ORDER).expect("order >= 1");
    let r = SymplecticPotential::reference(u.model.name);
    rule.nodes.iter().all(|x| {
        let h = u.jet(x).hess - r.jet(x).hess * (1.0 - margin);
        min_eigenvalue(&h) > 0.0
    })
}

/// The fixed five-metric catalog used for metric-independence checks.
pub fn catalog_metrics(model: ModelName) -> Vec<SymplecticPotential> {
    let specs = match model {
        ModelName::Cp1 => vec![
            MetricSpec::reference(model),
            MetricSpec::bubble(model, vec![0.1]),
            MetricSpec::bubble(model, vec![0.05, 0.08]),
            MetricSpec::bubble(model, vec![-0.2, 0.0, 0.1]),
            MetricSpec {
                model,
                psi_catalog_id: "poly".into(),
                coefficients: vec![0.0, 0.1, 0.3, 0.05],
            },
        ],
        ModelName::Hirzebruch1 => vec![
            MetricSpec::reference(model),
            MetricSpec::bubble(model, vec![0.02]),
            MetricSpec::bubble(model, vec![0.01, -0.01, 0.015]),
            MetricSpec::bubble(model, vec![-0.02, 0.0, 0.0, 0.005, 0.0, 0.005]),
            MetricSpec {
                model,
                psi_catalog_id: "poly".into(),
                coefficients: vec![0.0, 0.1, -0.05, 0.3, 0.1, 0.2],
            },
        ],
    };
    specs
        .into_iter()
        .map(|s| SymplecticPotential::new(s).expect("catalog spec is valid"))
        .collect()
}

impl From<SymplecticPotential> for MetricSpec {
    fn from(u: SymplecticPotential) -> Self {
        u.spec
    }
}

pub(crate) fn degenerate(node: usize, min_eigenvalue: f64) -> LabError {
    LabError::DegenerateMetric {
        node,
        min_eigenvalue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp1_reference_closed_form() {
        let u = SymplecticPotential::reference(ModelName::Cp1);
        for &x in &[-0.9, -0.3, 0.0, 0.4, 0.99] {
            let j = u.jet(&[x]);
            let exact = (1.0 + x) * (1.0 + x).ln() + (1.0 - x) * (1.0 - x).ln();
            assert!((j.value - exact).abs() < 1e-14);
            assert!((j.hess[(0, 0)] - 2.0 / (1.0 - x * x)).abs() < 1e-10 * j.hess[(0, 0)]);
            let dual = x * j.grad[0] - j.value;
            assert!((u.dual_value(&[x]) - dual).abs() < 1e-12);
        }
    }

    #[test]
    fn bubble_psi_vanishes_on_boundary() {
        let m = ManifoldModel::new(ModelName::Hirzebruch1);
        let psi = MetricSpec::bubble(ModelName::Hirzebruch1, vec![1.0, 2.0])
            .psi(&m)
            .unwrap();
        for v in &m.polytope.vertices {
            assert!(psi.eval(v).abs() < 1e-12);
        }
        let cp1 = ManifoldModel::new(ModelName::Cp1);
        let psi = MetricSpec::bubble(ModelName::Cp1, vec![0.1])
            .psi(&cp1)
            .unwrap();
        assert!((psi.eval(&[0.5]) - 0.1 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn higher_derivatives_match_finite_differences() {
        let u = &catalog_metrics(ModelName::Hirzebruch1)[2];
        let x = [0.2, 0.1];
        let (d3, d4) = u.higher(&x);
        let h = 1e-5;
        for a in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[a] += h;
            xm[a] -= h;
            let fd3 = (u.jet(&xp).hess - u.jet(&xm).hess) / (2.0 * h);
            assert!((fd3 - &d3[a]).abs().max() < 1e-6);
            let (p3, _) = u.higher(&xp);
            let (m3, _) = u.higher(&xm);
            for b in 0..2 {
                let fd4 = (&p3[b] - &m3[b]) / (2.0 * h);
                assert!((fd4 - &d4[a][b]).abs().max() < 1e-5);
            }
        }
    }

    #[test]
    fn random_metrics_are_deterministic_and_convex() {
        for model in [ModelName::Cp1, ModelName::Hirzebruch1] {
            let a = random_metric(model, 7, 3);
            let b = random_metric(model, 7, 3);
            assert_eq!(a.spec, b.spec);
            assert!(certify_convex(&a, 0.9));
        }
    }

    #[test]
    fn unknown_catalog_rejected() {
        let spec = MetricSpec {
            model: ModelName::Cp1,
            psi_catalog_id: "nope".into(),
            coefficients: vec![],
        };
        assert!(SymplecticPotential::new(spec).is_err());
    }

    #[test]
    fn min_eigenvalue_2x2() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((min_eigenvalue(&m) - 1.0).abs() < 1e-15);
    }
}
