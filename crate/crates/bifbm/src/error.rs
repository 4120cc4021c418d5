//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The covariance matrix was not positive definite even after jitter
    /// escalation; `pivot` is the first failing diagonal index.
    #[error("factorization failed at pivot {pivot}: matrix not positive definite after jitter escalation")]
    Factorization { pivot: usize },

    /// A configuration key failed validation.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
