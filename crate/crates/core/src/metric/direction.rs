//! Convex functions on the polytope used as geodesic directions.
//!
//! A toric geodesic is `u_t = u_0 + t·v`; `v` is drawn from this catalog.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::potential::Jet;
use crate::error::{invalid, Result};
use crate::geometry::{Poly, PolyJet};

/// Catalog entry for a direction, as it appears in ray catalog files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RaySpec {
    /// `v = -(<ξ, x> + c)`: the ray generated by the torus vector `ξ`, along
    /// which `φ̇ = θ_ξ` up to a constant.
    Affine {
        xi: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `v = max(0, <a, x> + b)`, smoothed as `δ·log(1 + e^{(<a,x>+b)/δ})`.
    Pl {
        a: Vec<f64>,
        b: f64,
        #[serde(default)]
        delta: Option<f64>,
    },
    /// Convex polynomial given as `[[i, j], coefficient]` terms (`j = 0` in dimension 1).
    Poly { terms: Vec<((u32, u32), f64)> },
}

/// Default fillet width for smoothed piecewise-linear directions.
pub const DEFAULT_DELTA: f64 = 1e-2;

#[derive(Debug, Clone)]
pub enum Direction {
    Affine { xi: Vec<f64>, c: f64 },
    SmoothedPl { a: Vec<f64>, b: f64, delta: f64 },
    Poly(Box<PolyJet>),
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Direction {
    pub fn from_spec(spec: &RaySpec, dim: usize, default_delta: f64) -> Result<Self> {
        match spec {
            RaySpec::Affine { xi, c } => {
                if xi.len() != dim {
                    return invalid("affine direction has wrong dimension");
                }
                Ok(Direction::Affine {
                    xi: xi.clone(),
                    c: *c,
                })
            }
            RaySpec::Pl { a, b, delta } => {
                if a.len() != dim {
                    return invalid("pl direction has wrong dimension");
                }
                let delta = delta.unwrap_or(default_delta);
                if delta <= 0.0 || !delta.is_finite() {
                    return invalid("pl smoothing width must be positive");
                }
                Ok(Direction::SmoothedPl {
                    a: a.clone(),
                    b: *b,
                    delta,
                })
            }
            RaySpec::Poly { terms } => {
                if dim == 1 && terms.iter().any(|((_, j), _)| *j != 0) {
                    return invalid("polynomial direction uses a second variable in dimension 1");
                }
                let p = Poly::from_terms(terms.iter().copied());
                Ok(Direction::Poly(Box::new(PolyJet::new(&p, dim))))
            }
        }
    }

    /// Linear form whose zero set carries the Hessian of a smoothed PL direction.
    pub fn crease(&self) -> Option<(&[f64], f64, f64)> {
        match self {
            Direction::SmoothedPl { a, b, delta } => Some((a, *b, *delta)),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Direction::Affine { xi, c } => -(dot(xi, x) + c),
            Direction::SmoothedPl { a, b, delta } => delta * softplus((dot(a, x) + b) / delta),
            Direction::Poly(j) => j.value.eval(x),
        }
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &[f64]) -> Jet {
        let dim = x.len();
        match self {
            Direction::Affine { xi, .. } => Jet {
                value: self.value(x),
                grad: DVector::from_iterator(dim, xi.iter().map(|c| -c)),
                hess: DMatrix::zeros(dim, dim),
            },
            Direction::SmoothedPl { a, b, delta } => {
                let z = (dot(a, x) + b) / delta;
                let s = logistic(z);
                let av = DVector::from_column_slice(a);
                Jet {
                    value: delta * softplus(z),
                    grad: &av * s,
                    hess: &av * av.transpose() * (s * (1.0 - s) / delta),
                }
            }
            Direction::Poly(j) => Jet {
                value: j.value.eval(x),
                grad: DVector::from_iterator(dim, j.d1.iter().map(|p| p.eval(x))),
                hess: DMatrix::from_fn(dim, dim, |i, k| j.d2[i][k].eval(x)),
            },
        }
    }

    /// Third and fourth derivative tensors: `d3[a]` is `∂_a` of the Hessian,
    /// `d4[a][b]` is `∂_a ∂_b` of the Hessian.
    pub fn higher(&self, x: &[f64]) -> (Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>) {
        let dim = x.len();
        match self {
            Direction::Affine { .. } => (
                vec![DMatrix::zeros(dim, dim); dim],
                vec![vec![DMatrix::zeros(dim, dim); dim]; dim],
            ),
            Direction::SmoothedPl { a, b, delta } => {
                let z = (dot(a, x) + b) / delta;
                let s = logistic(z);
                let s3 = s * (1.0 - s) * (1.0 - 2.0 * s) / (delta * delta);
                let s4 = s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s) / delta.powi(3);
                let av = DVector::from_column_slice(a);
                let aa = &av * av.transpose();
                let d3 = (0..dim).map(|i| &aa * (a[i] * s3)).collect();
                let d4 = (0..dim)
                    .map(|i| (0..dim).map(|k| &aa * (a[i] * a[k] * s4)).collect())
                    .collect();
                (d3, d4)
            }
            Direction::Poly(j) => {
                let d3 = (0..dim)
                    .map(|i| DMatrix::from_fn(dim, dim, |r, c| j.d3[r][c][i].eval(x)))
                    .collect();
                let d4 = (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|k| DMatrix::from_fn(dim, dim, |r, c| j.d4[r][c][i][k].eval(x)))
                            .collect()
                    })
                    .collect();
                (d3, d4)
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}
