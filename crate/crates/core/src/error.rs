use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: {detail}")]
    DimensionMismatch { axis: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("window schedule error on axis {axis}: {detail}")]
    Schedule { axis: &'static str, detail: String },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("bad magic {found:?}, expected \"VXSG\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported volume file version {0}")]
    Version(u32),

    #[error("truncated volume file: header needs {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(axis: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            axis,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::Config(detail.into())
    }
}
