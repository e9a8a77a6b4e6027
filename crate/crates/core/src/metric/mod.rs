//! Symplectic potentials, the metrics they define, and their Ricci potentials.

pub mod direction;
pub mod field;
pub mod legendre;
pub mod model;
pub mod potential;

pub use direction::{Direction, RaySpec, DEFAULT_DELTA};
pub use field::{
    grad_pairing, grid_csv, ricci_potential, MetricField, NodeField, RicciPotential, SampledMetric,
};
pub use legendre::{legendre_dual, legendre_point, roundtrip_error, ComplexPotential};
pub use model::ManifoldModel;
pub use potential::{catalog_metrics, random_metric, Jet, MetricSpec, SymplecticPotential};
