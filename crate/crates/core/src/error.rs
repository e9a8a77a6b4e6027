use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Hessian of a symplectic potential failed to be positive definite.
    #[error("degenerate metric at node {node}: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    DegenerateMetric { node: usize, min_eigenvalue: f64 },

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    /// Iterative solver gave up. `best` holds the last iterate when it is meaningful.
    #[error(
        "convergence failure in {context} after {iterations} iterations (residual {residual:e})"
    )]
    ConvergenceFailure {
        context: String,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// A flow step was rejected; retry with `suggested_dt`.
    #[error("step rejected at t = {t}: {reason} (suggested dt {suggested_dt:e})")]
    StepRejected {
        t: f64,
        reason: String,
        suggested_dt: f64,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidArgument(msg.into()))
}
