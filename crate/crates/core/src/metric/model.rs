use std::f64::consts::PI;

use crate::geometry::{build_model, ModelName, Polytope};

/// A toric Fano model together with its integration conventions.
///
/// The moment map pushes `ω^n` forward to `c_n · dλ` on the polytope, so
/// `∫_M G ω^n = c_n ∫_P G dλ` for invariant `G`, and `V = c_n · vol(P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    pub name: ModelName,
    pub polytope: Polytope,
    /// Complex dimension.
    pub n: usize,
    /// `(2π)^n n!`
    pub c_n: f64,
    /// Total volume `V`.
    pub volume: f64,
}

impl ManifoldModel {
    pub fn new(name: ModelName) -> Self {
        let polytope = build_model(name);
        let n = polytope.dim;
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let c_n = (2.0 * PI).powi(n as i32) * factorial;
        let volume = c_n * polytope.volume();
        Self {
            name,
            polytope,
            n,
            c_n,
            volume,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lebesgue volume of the polytope.
    pub fn polytope_volume(&self) -> f64 {
        self.polytope.volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes() {
        let cp1 = ManifoldModel::new(ModelName::Cp1);
        assert!((cp1.volume - 4.0 * PI).abs() < 1e-14);
        let f1 = ManifoldModel::new(ModelName::Hirzebruch1);
        assert!((f1.c_n - 8.0 * PI * PI).abs() < 1e-12);
        assert!((f1.volume - 32.0 * PI * PI).abs() < 1e-11);
    }
}
