use thiserror::Error;

/// Errors raised while configuring, building or evaluating a design problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("program declares no `{0}` variables")]
    MissingVariable(String),
    #[error("covariance is numerically zero (largest eigenvalue {0:.3e}); nothing is transmitted")]
    ZeroCovariance(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
