use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block spec: {0}")]
    InvalidBlockSpec(String),

    #[error("scene too small: grid extent {extent} m cannot hold one block of {block} m")]
    SceneTooSmall { extent: f64, block: f64 },

    #[error("transmitter sampling exhausted its budget of {attempts} attempts ({accepted} of {requested} placed)")]
    TxBudgetExhausted {
        attempts: u64,
        accepted: usize,
        requested: usize,
    },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("scene has no road strips to place a street trajectory on")]
    NoRoads,

    #[error("invalid depth {0}: must be finite and positive")]
    InvalidDepth(f64),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid radio parameter: {0}")]
    InvalidRadioParam(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("no usable samples: {0}")]
    EmptyInput(String),

    #[error("malformed {format} file: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
