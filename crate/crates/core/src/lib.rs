//! Numerical laboratory for Kähler geometry on torus-symmetric Fano models.
//!
//! Every invariant metric on CP¹ or the Hirzebruch surface F₁ is encoded by
//! a convex symplectic potential on its moment polytope, so manifold
//! integrals become polytope quadrature and the PDEs involved become one- or
//! two-dimensional.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geodesic;
pub mod geometry;
pub mod invariants;
pub mod metric;

pub use error::{LabError, Result};
