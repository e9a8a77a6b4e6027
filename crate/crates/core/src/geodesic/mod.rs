//! Geodesics in the space of invariant potentials, the ε-regularized
//! geodesic solver, and stability probes along ray catalogs.

pub mod catalog;
pub mod eps;
pub mod path;
pub mod probe;

pub use catalog::ray_catalog;
pub use eps::{
    eps_convergence, eps_geodesic_solve, exact_geodesic, EpsConvergence, EpsGeodesicProblem,
    EpsGeodesicSolution,
};
pub use path::{dh_dt_identity, h_of_t, GeodesicPath, PathKind, PathSample, SlopeCheck};
pub use probe::{
    path_trace, stability_probe, trace_csv, RayVerdict, StabilityReport, TraceRow,
    MODIFIED_PROBE_TOL, ON_CATALOG_HEADER, PROBE_TIMES, PROBE_TOL,
};
