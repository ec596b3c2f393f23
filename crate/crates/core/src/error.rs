use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient input: {0}")]
    InsufficientInput(String),

    #[error("timestamp ordering violated: tau {tau} must exceed previous {previous}")]
    Ordering { tau: f32, previous: f32 },

    #[error("degenerate template: tau_final is zero")]
    DegenerateTemplate,

    #[error("invalid spec: {0}")]
    Spec(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("episode error: {0}")]
    Episode(String),

    #[error("parse error in {path} at record {record}: {message}")]
    Parse {
        path: PathBuf,
        record: usize,
        message: String,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
