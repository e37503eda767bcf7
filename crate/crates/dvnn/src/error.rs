use std::io;
use std::path::PathBuf;

/// Errors of the front end, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dvnn_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| AppError::Csv { path, source }
    }

    /// 1 usage or input, 2 numerical failure, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Io { .. } | AppError::Csv { .. } => 1,
            AppError::Core(e) => match e {
                dvnn_core::Error::Config(_) | dvnn_core::Error::Dimension { .. } => 1,
                dvnn_core::Error::Diverged { .. } | dvnn_core::Error::Undefined(_) => 2,
            },
            AppError::Verification(_) => 3,
        }
    }
}
