use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation support has zero probability mass")]
    ZeroMass,

    #[error("p-value {p} is not below the selection threshold {alpha0}")]
    NotSelected { p: f64, alpha0: f64 },

    #[error("statistic is not z-approximable: {0}")]
    NotZApproximable(String),

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("degenerate selective problem: {0}")]
    DegenerateProblem(String),

    #[error("schema error: unknown or missing column `{0}`")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
