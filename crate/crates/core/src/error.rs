use thiserror::Error;

/// Failure categories shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input sits on a degenerate point where the requested quantity is undefined
    /// (zero norm, product state, flat calibration scan, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A computed quantity violated one of its invariants beyond tolerance.
    #[error("numerical validation failed: {0}")]
    NumericalValidation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalValidation(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateInput(_) => 3,
            Error::NumericalValidation(_) => 4,
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
        }
    }
}
