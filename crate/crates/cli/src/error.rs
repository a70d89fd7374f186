use jumpsas_core::Error as CoreError;
use thiserror::Error;

/// Failures of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, unreadable or malformed input data. Exit code 1.
    #[error("input error: {0}")]
    Input(String),
    /// Anything that went wrong after the inputs were accepted. Exit code 2.
    #[error("internal failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_)
            | CoreError::OutOfRange { .. }
            | CoreError::InvalidRange { .. }
            | CoreError::DuplicatePoint(..)
            | CoreError::InvalidConfiguration(_)
            | CoreError::Parse { .. }
            | CoreError::Json(_) => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
