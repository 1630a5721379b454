use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or a scenario that fails validation.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] loopgroup::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(loopgroup::Error::Parse(_) | loopgroup::Error::UnsupportedVersion(_) | loopgroup::Error::Json(_) | loopgroup::Error::Io(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}
