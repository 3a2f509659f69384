use std::fmt;

/// Errors surfaced by the analysis pipeline.
///
/// Each variant maps onto one of the CLI exit classes through
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace format error at line {line}: {message}")]
    TraceFormat { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("manifest error at {location}: {message}")]
    Manifest { location: String, message: String },

    #[error("tracker list error at line {line}: {message}")]
    TrackerList { line: usize, message: String },

    #[error("invalid document: {0}")]
    Document(#[from] serde_json::Error),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit classes used by the command-line driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Success = 0,
    Usage = 1,
    InputFormat = 2,
    Internal = 3,
}

impl Error {
    pub fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn manifest(location: impl Into<String>, message: impl fmt::Display) -> Self {
        Error::Manifest {
            location: location.into(),
            message: message.to_string(),
        }
    }

    pub fn invariant(msg: impl fmt::Display) -> Self {
        Error::Invariant(msg.to_string())
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::Usage(_) => ExitClass::Usage,
            Error::Invariant(_) => ExitClass::Internal,
            Error::Io(_)
            | Error::TraceFormat { .. }
            | Error::Config(_)
            | Error::Manifest { .. }
            | Error::TrackerList { .. }
            | Error::Document(_) => ExitClass::InputFormat,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.exit_class() as i32
    }
}
