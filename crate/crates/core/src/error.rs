use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("alignment error in {}: expected {expected}, got {got}", file.display())]
    Alignment {
        file: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("empty file: {}", .0.display())]
    EmptyFile(PathBuf),

    #[error("duplicate system id `{0}`")]
    DuplicateSystem(String),

    #[error("unknown system id `{0}`")]
    UnknownSystem(String),

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Alignment { .. } => "alignment",
            Error::EmptyFile(_) => "empty_file",
            Error::DuplicateSystem(_) => "duplicate_system",
            Error::UnknownSystem(_) => "unknown_system",
            Error::Parse { .. } => "parse",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
        }
    }

    /// Process exit status: 1 usage/config, 2 data/alignment, 3 statistical
    /// precondition failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Io { .. }
            | Error::Alignment { .. }
            | Error::EmptyFile(_)
            | Error::DuplicateSystem(_)
            | Error::UnknownSystem(_)
            | Error::Parse { .. } => 2,
            Error::UndefinedCorrelation(_) | Error::InsufficientData(_) | Error::Degenerate(_) => 3,
        }
    }
}
