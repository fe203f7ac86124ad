use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, parameters or input files.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{0}")]
    Core(reptest::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// `--check` found an aggregate outside its expected bounds.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            // Every core error stems from bad parameters or inputs.
            CliError::Validation(_) | CliError::Core(_) => 2,
            CliError::CheckFailed(_) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }
}

impl From<reptest::Error> for CliError {
    fn from(e: reptest::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
