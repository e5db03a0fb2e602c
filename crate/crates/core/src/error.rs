use thiserror::Error;

/// Errors raised by path construction, integration and certification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A structural invariant of an input object does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// An operation precondition is not met by otherwise valid input.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Inconsistent or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A numerical run left its admissible region (e.g. state blow-up).
    #[error("diagnostic: {0}")]
    Diagnostic(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Invariant(_) => "invariant",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Diagnostic(_) => "diagnostic",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
