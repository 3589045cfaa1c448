use std::path::Path;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or flag combinations.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent input, or a failure while running.
    #[error("{0}")]
    Data(String),
    /// A demo or self-check did not meet its threshold.
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub fn in_file(path: &Path, err: kenn_core::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<kenn_core::Error> for CliError {
    fn from(err: kenn_core::Error) -> Self {
        match err {
            kenn_core::Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
