use thiserror::Error;

/// Errors surfaced by the numerics layers and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A named input parameter failed validation.
    #[error("invalid {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// An input was structurally fine but outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The circulant embedding of the increment covariance had a negative
    /// eigenvalue beyond tolerance; the exact sampler refuses to clip it.
    #[error("circulant embedding is not nonnegative definite (min eigenvalue {min_eigenvalue:.3e}, tolerance {tolerance:.3e})")]
    CirculantNotPsd { min_eigenvalue: f64, tolerance: f64 },

    /// The covariance matrix admitted no Cholesky factorization.
    #[error("covariance matrix is not positive definite; Cholesky factorization failed")]
    CholeskyFailed,

    /// A Besov-norm refinement diagnostic indicated divergence; the norm
    /// trajectory across grid levels is carried for inspection.
    #[error("Besov norm diverges under refinement (beta = {beta}, norms across levels: {norms:?})")]
    BesovDivergent { beta: f64, norms: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub fn domain(reason: impl Into<String>) -> Self {
        Error::Domain(reason.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
