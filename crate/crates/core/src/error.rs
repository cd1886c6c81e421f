use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are grouped by who is at fault: the first block covers bad
/// input or configuration from the caller, the second covers failures that
/// are internal to a computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("structural error in {path}: {message}")]
    Structure { path: PathBuf, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("non-finite gradient in layer {layer} ({detail})")]
    NonFinite { layer: usize, detail: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Structure { .. } => "structure",
            Error::Contract(_) => "contract",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::NonFinite { .. } => "non_finite",
            Error::Internal(_) => "internal",
        }
    }

    /// True when the caller supplied bad input or configuration, false when
    /// the failure happened inside a computation.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::NonFinite { .. } | Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
