use std::path::Path;

use facecloud_core::Error as CoreError;

/// Failure of a command, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
    #[error("data/model mismatch: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Pipeline(_) | AppError::Io { .. } => 3,
            AppError::Mismatch(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.display().to_string(), source }
    }

    pub fn parse(path: &Path, msg: impl std::fmt::Display) -> Self {
        AppError::Mismatch(format!("{}: {msg}", path.display()))
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e.root() {
            CoreError::InvalidParameter { .. } => AppError::Config(msg),
            CoreError::ShapeMismatch(_) | CoreError::CloudTooSmall { .. } | CoreError::SubsetTooSmall { .. } => {
                AppError::Mismatch(msg)
            }
            _ => AppError::Pipeline(msg),
        }
    }
}
