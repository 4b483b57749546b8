use std::io;

use kzstream_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("serialization: {0}")]
    Format(String),
}

impl CliError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, msg: msg.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 0 success, 2 parse or usage, 3 overflow or probabilistic failure, 4 budget refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) | CliError::Format(_) => 2,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::RecoveryOverflow { .. } | CoreError::Overflow(_) => 3,
                CoreError::BudgetExceeded { .. } | CoreError::SupportTooLarge { .. } => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
