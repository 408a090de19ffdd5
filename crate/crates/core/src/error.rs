use thiserror::Error;

/// Errors raised by the solvers, oracles and configuration loaders.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (off-grid time,
    /// misaligned paths, a start point outside the ball, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A solver parameter violates a stability or consistency requirement.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Non-finite values or an iterative method that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A recursion or enumeration budget was exhausted.
    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Parameter(_) => "parameter",
            Error::Numeric(_) => "numeric",
            Error::Budget(_) => "budget",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

pub(crate) fn budget(msg: impl Into<String>) -> Error {
    Error::Budget(msg.into())
}
