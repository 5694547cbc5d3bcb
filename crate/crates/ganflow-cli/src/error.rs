use thiserror::Error;

/// Harness-level failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum AppError {
    /// Bad configuration: parse failure, unknown keys, invalid field values,
    /// or a config whose experiment kind does not match the subcommand.
    #[error("config error: {0}")]
    Config(String),

    /// A run produced non-finite values or a self-check failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem trouble while reading configs or emitting artifacts.
    #[error("i/o error: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        AppError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
