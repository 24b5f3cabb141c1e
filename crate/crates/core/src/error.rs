use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: expected {expected}, found {found}")]
    Shape {
        layer: usize,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {what} (layer {layer})")]
    NonFinite { what: &'static str, layer: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("episode state error: {0}")]
    EpisodeState(String),

    #[error("checkpoint mismatch in {network}, layer {layer}: expected {expected}, found {found}")]
    CheckpointMismatch {
        network: String,
        layer: usize,
        expected: String,
        found: String,
    },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("layout parse error at line {line}: {msg}")]
    Layout { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
