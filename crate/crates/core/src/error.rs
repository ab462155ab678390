use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tensor is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("tensor is not coercive (smallest eigenvalue {0:e})")]
    NotCoercive(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("degenerate element {element} (measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("singular or indefinite matrix (pivot {0:e})")]
    Singular(f64),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonNotConverged { iterations: usize, residual: f64 },

    #[error("line search failed to reduce the residual (residual {residual:e})")]
    LineSearchFailed { residual: f64 },

    #[error("time step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step { step, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
