use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested combination (family/base pair, normalization mode, ...)
    /// is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The reference density vanishes where the other one does not.
    #[error("non-integrable: {0}")]
    NonIntegrable(String),

    /// No scaling parameter reproduces the requested tail probability.
    #[error("no lambda attains alpha = {alpha}; attainable tail probabilities lie in ({low}, {high})")]
    InfeasibleTail { alpha: f64, low: f64, high: f64 },

    #[error("MCMC initialization failed: {0}")]
    Initialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
