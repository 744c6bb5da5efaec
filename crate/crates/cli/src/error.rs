use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Clap(#[from] clap::Error),

    /// Schema or row errors in the input file.
    #[error("{0}")]
    Input(String),

    #[error("no eligible studies in the input")]
    EmptyEligible,

    #[error(transparent)]
    Core(#[from] replicate_core::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Clap(e) => e.exit_code(),
            CliError::EmptyEligible => 3,
            CliError::Core(replicate_core::Error::Schema(_) | replicate_core::Error::Row { .. }) => 2,
            _ => 1,
        }
    }
}
