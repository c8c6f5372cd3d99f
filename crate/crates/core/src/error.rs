use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("route has {count} points, at least {min} are needed")]
    RouteTooShort { count: usize, min: usize },

    #[error("{0} is outside the domain of the function")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{stage}: cannot read {path}: {source}")]
    Read {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: cannot write {path}: {source}")]
    Write {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: malformed {path}: {message}")]
    Parse {
        stage: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
}

impl Error {
    pub fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code for this failure class: 2 configuration, 3 data,
    /// 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Domain(_) | Error::RouteTooShort { .. } => 2,
            Error::Numeric(_) => 4,
            Error::Shape { .. }
            | Error::Data(_)
            | Error::Read { .. }
            | Error::Write { .. }
            | Error::Parse { .. }
            | Error::Version { .. } => 3,
        }
    }
}
