//! Error taxonomy shared by the library, the CLI and the C interface.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("boundary case: {0}")]
    BoundaryCase(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {msg} (achieved {achieved:.3e})")]
    Numerical { msg: String, achieved: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate moment: {0}")]
    Degenerate(String),
    #[error("regularity error: {0}")]
    Regularity(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            msg: msg.into(),
            achieved,
        }
    }

    /// Process exit code used by the CLI and mirrored by the C interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parameter(_) | Error::BoundaryCase(_) | Error::Unsupported(_) => 2,
            Error::Input(_) | Error::Io(_) => 3,
            Error::Numerical { .. } | Error::Resolution(_) | Error::Degenerate(_) => 4,
            Error::Regularity(_) | Error::Solver(_) => 5,
            Error::Capacity(_) => 6,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
