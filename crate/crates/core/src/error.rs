use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic, expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: truncated payload ({what})")]
    Truncated { path: PathBuf, what: String },

    #[error("{path}: malformed: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("quaternion norm {norm} is not within 1e-6 of 1; normalize first")]
    NonUnitQuaternion { norm: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("encoder error: {0}")]
    Encoder(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
