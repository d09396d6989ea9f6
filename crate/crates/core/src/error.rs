use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("map is not regular at {at}: {detail}")]
    Regularity { at: String, detail: String },
    #[error("left the coordinate domain at t = {t}")]
    DomainExit { t: f64, state: Vec<f64> },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },
    #[error("shooting did not converge after {iterations} iterations (miss {miss})")]
    Shooting { iterations: usize, miss: f64 },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Parse(#[from] crate::catalog::ParseError),
    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
