//! CLI error categories and their process exit codes.

use metainf_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("no trained snapshot in {0}; run `metainf train` first")]
    NoSnapshot(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(CoreError::Json(e))
    }
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_PROVIDER: i32 = 5;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::NoSnapshot(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                CoreError::InvalidInput(_) => EXIT_USAGE,
                CoreError::Infeasible { .. } => EXIT_INFEASIBLE,
                CoreError::Provider { .. } => EXIT_PROVIDER,
                _ => EXIT_DATA,
            },
        }
    }
}
