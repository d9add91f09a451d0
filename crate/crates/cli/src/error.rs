use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// A validator reported a residual above its threshold.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Numerical(#[from] stochpoisson::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
