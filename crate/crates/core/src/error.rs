use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the learn/abstract/refine pipeline.
#[derive(Debug, Error)]
pub enum LarError {
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown state {0}")]
    UnknownState(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("sampler failed on trace {index}: {message}")]
    Sampler { index: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LarError {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        LarError::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LarError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = LarError> = std::result::Result<T, E>;
