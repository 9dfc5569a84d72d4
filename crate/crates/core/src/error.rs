use thiserror::Error;

/// Errors raised by the data layer, quantum objects and the integrator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("step limit of {nsteps} exhausted while integrating from t={from} towards t={to}")]
    StepLimit { nsteps: usize, from: f64, to: f64 },
    #[error("step size underflow at t={t} (h={h:.3e}); problem may be stiff")]
    Stiffness { t: f64, h: f64 },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("method not applicable: {0}")]
    Method(String),
    #[error("unknown kind '{0}'")]
    UnknownKind(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
