use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RunError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}, row {row}: {message}")]
    Csv { file: PathBuf, row: usize, message: String },
    #[error("manifest mismatch: {0}")]
    Verify(String),
    #[error(transparent)]
    Core(#[from] sgd_walk_core::Error),
}

impl RunError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 config, 3 numeric divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use sgd_walk_core::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } | RunError::Csv { .. } | RunError::Verify(_) => 4,
            RunError::Core(e) => match e {
                E::Diverged { .. } | E::NonFinite { .. } => 3,
                E::Io { .. } | E::BadMagic { .. } | E::ShortRead { .. } | E::CountMismatch { .. } | E::Format { .. } => 4,
                _ => 2,
            },
        }
    }
}
