use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A function was evaluated outside its domain (non-finite result).
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructor received an invalid parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The velocity Hessian is singular or too ill-conditioned to solve against.
    #[error("degenerate Lagrangian: {0}")]
    Degeneracy(String),

    /// Newton inversion of the Legendre map did not converge.
    #[error("Legendre inversion failed: {0}")]
    Inversion(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A symmetry or axis index is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Malformed user input (path specs, config files, flags).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Usage(e.to_string())
    }
}
