//! Sparse polynomials in one or two real variables.
//!
//! Perturbations of symplectic potentials and convex ray directions are
//! built from these so that every derivative is exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Multi-index `(a, b)` for the monomial `x^a y^b`. In one variable `b` is always 0.
pub type Exponent = (u32, u32);

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    terms: BTreeMap<Exponent, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial((0, 0), c)
    }

    pub fn monomial(exp: Exponent, coeff: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coeff);
        p
    }

    /// The affine form `<a, x> + b`.
    pub fn affine(a: &[f64], b: f64) -> Self {
        let mut p = Self::constant(b);
        if let Some(&a0) = a.first() {
            p.add_term((1, 0), a0);
        }
        if let Some(&a1) = a.get(1) {
            p.add_term((0, 1), a1);
        }
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Exponent, f64)>) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exp: Exponent, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exp).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&exp);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponent, f64)> + '_ {
        self.terms.iter().map(|(&e, &c)| (e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x0 = x.first().copied().unwrap_or(0.0);
        let x1 = x.get(1).copied().unwrap_or(0.0);
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c * x0.powi(a as i32) * x1.powi(b as i32))
            .sum()
    }

    /// Partial derivative with respect to variable `var` (0 or 1).
    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero();
        for (&(a, b), &c) in &self.terms {
            match var {
                0 if a > 0 => out.add_term((a - 1, b), c * a as f64),
                1 if b > 0 => out.add_term((a, b - 1), c * b as f64),
                _ => {}
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::from_terms(self.terms().map(|(e, c)| (e, c * s)))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (&(a, b), &c) in &self.terms {
            for (&(p, q), &d) in &other.terms {
                out.add_term((a + p, b + q), c * d);
            }
        }
        out
    }
}

/// All partial derivatives of a polynomial up to fourth order, precomputed.
///
/// Index layout: `d1[i]`, `d2[i][j]`, `d3[i][j][k]`, `d4[i][j][k][l]` for
/// variables `i, j, k, l < dim`.
#[derive(Debug, Clone)]
pub struct PolyJet {
    pub dim: usize,
    pub value: Poly,
    pub d1: Vec<Poly>,
    pub d2: Vec<Vec<Poly>>,
    pub d3: Vec<Vec<Vec<Poly>>>,
    pub d4: Vec<Vec<Vec<Vec<Poly>>>>,
}

impl PolyJet {
    pub fn new(p: &Poly, dim: usize) -> Self {
        let d1: Vec<Poly> = (0..dim).map(|i| p.derivative(i)).collect();
        let d2: Vec<Vec<Poly>> = d1
            .iter()
            .map(|q| (0..dim).map(|j| q.derivative(j)).collect())
            .collect();
        let d3: Vec<Vec<Vec<Poly>>> = d2
            .iter()
            .map(|row| {
                row.iter()
                    .map(|q| (0..dim).map(|k| q.derivative(k)).collect())
                    .collect()
            })
            .collect();
        let d4 = d3
            .iter()
            .map(|a| {
                a.iter()
                    .map(|b| {
                        b.iter()
                            .map(|q| (0..dim).map(|l| q.derivative(l)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            dim,
            value: p.clone(),
            d1,
            d2,
            d3,
            d4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_derivative() {
        // (1 - x^2) * (1 + y)
        let a = Poly::from_terms([((0, 0), 1.0), ((2, 0), -1.0)]);
        let b = Poly::affine(&[0.0, 1.0], 1.0);
        let p = a.mul(&b);
        assert_eq!(p.degree(), 3);
        let x = [0.3, -0.4];
        assert!((p.eval(&x) - (1.0 - 0.09) * 0.6).abs() < 1e-15);
        let dx = p.derivative(0);
        assert!((dx.eval(&x) - (-0.6) * 0.6).abs() < 1e-15);
        let dy = p.derivative(1);
        assert!((dy.eval(&x) - 0.91).abs() < 1e-15);
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = Poly::monomial((1, 1), 2.0).add(&Poly::monomial((1, 1), -2.0));
        assert!(p.is_zero());
    }

    #[test]
    fn jet_fourth_derivative_of_quartic() {
        let p = Poly::monomial((4, 0), 1.0);
        let jet = PolyJet::new(&p, 1);
        assert_eq!(jet.d4[0][0][0][0].eval(&[0.7]), 24.0);
        assert!((jet.d3[0][0][0].eval(&[0.5]) - 12.0).abs() < 1e-15);
    }
}
