use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: duplicate id `{id}`", path.display())]
    DuplicateId { path: PathBuf, line: usize, id: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),

    #[error("template `{template}` needs a value for `{{{placeholder}}}`")]
    MissingPlaceholder { template: String, placeholder: String },

    /// Transport-level failure that survived every retry.
    #[error("backend `{backend}` failed after {attempts} attempt(s): {last_error}")]
    BackendFailure {
        backend: String,
        attempts: u32,
        last_error: String,
    },

    /// The backend answered, but never with something usable.
    #[error("backend `{backend}` gave no usable response after {attempts} attempt(s): {reason}")]
    InvalidResponse {
        backend: String,
        attempts: u32,
        reason: String,
    },

    #[error("judge `{judge}` failed: {source}")]
    Judge {
        judge: String,
        #[source]
        source: Box<Error>,
    },

    #[error("ranking error: {0}")]
    Ranking(String),

    #[error("kurtosis is undefined for zero-variance input")]
    ZeroVariance,

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("adapter `{adapter}` returned a non-finite score for story `{story}`")]
    NonFiniteScore { adapter: String, story: String },

    #[error("adapter `{adapter}` failed: {message}")]
    Adapter { adapter: String, message: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
