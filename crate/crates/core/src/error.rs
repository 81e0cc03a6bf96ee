use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the function (e.g. a non-positive frequency).
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown preset `{0}` (expected `worst` or `best`)")]
    UnknownPreset(String),
    /// Rejection sampling ran out of attempts.
    #[error("sampling failed: `{distribution}` draws rejected {attempts} times in a row")]
    Sampling {
        distribution: &'static str,
        attempts: usize,
    },
    /// A numerical fit could not be carried out.
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
