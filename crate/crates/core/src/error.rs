use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Where in an input a format error was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(u64),
    Row(usize),
    Key(String),
    Unknown,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte offset {n}"),
            Location::Row(n) => write!(f, "row {n}"),
            Location::Key(k) => write!(f, "key `{k}`"),
            Location::Unknown => f.write_str("unknown location"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error in {source_name} at {location}: {message}")]
    Format {
        source_name: String,
        location: Location,
        message: String,
    },
    #[error("content error: {0}")]
    Content(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("antipodal sampling accepted nothing after {attempts} attempts (acceptance rate {rate:.4})")]
    Sampling { attempts: usize, rate: f64 },
    #[error("rate undefined: {0}")]
    UndefinedRate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("object `{object}` with gripper `{gripper}`: {source}")]
    Pair {
        object: String,
        gripper: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(
        source_name: impl Into<String>,
        location: Location,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            source_name: source_name.into(),
            location,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Pair { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
