use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TanError>;

#[derive(Debug, Error)]
pub enum TanError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Csv { path: PathBuf, row: usize, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Train(#[from] tan_core::Error),
}

impl TanError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        TanError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for bad configuration, 2 for a failed run.
    pub fn exit_code(&self) -> i32 {
        match self {
            TanError::Config(_) => 1,
            TanError::Train(tan_core::Error::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}
