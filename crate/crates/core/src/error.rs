use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error type shared by every module of the crate.
///
/// The variants are grouped by the process exit code the CLI maps them to:
/// validation problems (2), text-generation backend failures (3) and
/// numerical failures (4). I/O and format errors count as validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown id {id:?} in {table}")]
    UnknownId { table: &'static str, id: String },

    #[error("backend error for prompt {fingerprint}: {message}")]
    Backend { fingerprint: String, message: String },

    #[error("non-finite value in {context} (layer {layer})")]
    Numeric { context: String, layer: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(context: impl Into<String>, layer: usize) -> Self {
        Error::Numeric {
            context: context.into(),
            layer,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Backend { .. } => 3,
            Error::Numeric { .. } | Error::Diverged { .. } => 4,
            _ => 2,
        }
    }
}
