use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size must be a power of two >= 8, got {0}")]
    InvalidGrid(usize),

    #[error("field shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("spectral coefficients are not conjugate symmetric (component {component}, mode {mode}, defect {defect:e})")]
    NotConjugateSymmetric { component: usize, mode: i64, defect: f64 },

    #[error("negative time {0} passed to heat semigroup")]
    NegativeTime(f64),

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate}, residual {residual:e})")]
    NoConvergence { iterations: usize, estimate: f64, residual: f64 },

    #[error("only {available} renormalization intervals after burn-in, need at least {required}")]
    InsufficientBatches { available: usize, required: usize },

    #[error("operation requires a {expected} potential, got {found}")]
    WrongKind { expected: &'static str, found: &'static str },

    #[error("Hessian determinant {0:e} is too small for a non-degenerate minimum")]
    DegenerateHessian(f64),

    #[error("kappa = {kappa} does not exceed kappa_0 = {kappa0}")]
    KappaTooSmall { kappa: f64, kappa0: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures (blow-up, eigensolver stall) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NoConvergence { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
