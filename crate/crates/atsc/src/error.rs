use std::path::PathBuf;

/// Everything the command line can fail with.
#[derive(Debug, thiserror::Error)]
pub enum AtscError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u8, expected: u8 },
    #[error("checkpoint does not match: {0}")]
    Incompatible(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] atsc_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AtscError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Whether the failure stems from user configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            AtscError::Config(_)
                | AtscError::Parse { .. }
                | AtscError::Core(atsc_core::Error::InvalidConfig(_) | atsc_core::Error::InvalidNetwork(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, AtscError>;
