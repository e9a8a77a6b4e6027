//! Moment polytopes, polynomials on them, and interior quadrature.

pub mod poly;
pub mod polytope;
pub mod quadrature;

pub use poly::{Poly, PolyJet};
pub use polytope::{build_model, ModelName, Polytope};
pub use quadrature::{
    gauss_legendre, graded_quadrature, moments_with, polytope_moments, quadrature, QuadratureRule,
};
