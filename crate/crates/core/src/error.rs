use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The regularized Gram matrix was not numerically positive definite.
    #[error("Cholesky factorization failed (lambda = {lambda})")]
    CholeskyFailure { lambda: f64 },

    #[error("enumeration size guard: {points} points exceeds the limit of {limit}")]
    SizeGuard { points: f64, limit: u64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
