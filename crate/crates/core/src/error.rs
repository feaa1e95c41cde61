use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("Weibull renewal series diverged at t = {t} (after {terms} terms)")]
    SeriesDivergence { t: f64, terms: usize },

    #[error("infinite second moment: {0} requires a finite dispersion index")]
    InfiniteVariance(&'static str),

    #[error("system matrix is numerically singular (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exhaustive matching limited to {limit} points in total, got {got}")]
    SizeLimit { limit: usize, got: usize },

    #[error("{source_label}: line {line}: {message}")]
    Parse { source_label: String, line: usize, message: String },

    #[error("{0}: trace contains no timestamps")]
    EmptyTrace(String),

    #[error("{label}: timestamps decrease on {decreasing} of {total} lines")]
    NonMonotone { label: String, decreasing: usize, total: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0} did not converge within {1} iterations")]
    NonConvergence(&'static str, usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}
