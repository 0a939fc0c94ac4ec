use thiserror::Error;

/// Everything the command-line layer can fail with.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input at row {row}, column {column}: {message}")]
    Malformed { row: u64, column: String, message: String },
    #[error("malformed input: {0}")]
    Csv(String),
    #[error("config schema: {0}")]
    Schema(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sipipe_core::Error),
}

impl AppError {
    /// Process exit code: 2 for bad input or configuration, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if !e.is_data_error() => 3,
            _ => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
