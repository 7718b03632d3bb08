use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] relwave_core::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for I/O, 3 for convergence or basis failures, 4 for bad input.
    pub fn exit_code(&self) -> i32 {
        use relwave_core::Error as E;
        match self {
            CliError::Io { .. } | CliError::Json(_) => 2,
            CliError::Config(_) => 4,
            CliError::Core(E::InvalidParameter { .. } | E::Domain(_)) => 4,
            CliError::Core(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
