use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every pipeline stage.
#[derive(Debug, Error)]
pub enum EmendError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("word not in embedding vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("unsupported {kind} format version {found} (this build reads version {expected})")]
    VersionMismatch {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },
}

pub type Result<T> = std::result::Result<T, EmendError>;

impl EmendError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EmendError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        EmendError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
