use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = BendError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BendError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error in {location}: {message}")]
    Format { location: String, message: String },

    #[error("corrupt artifact {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("unsupported artifact version {found} in {path} (expected {expected})")]
    Version { path: PathBuf, found: u32, expected: u32 },

    #[error("break-even ensemble size is undefined: {0}")]
    UndefinedBreakEven(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BendError {
    pub fn shape(msg: impl Into<String>) -> Self {
        BendError::Shape(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        BendError::Input(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        BendError::Numeric(msg.into())
    }

    pub fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        BendError::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BendError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line front end.
    ///
    /// 2 = config/input, 3 = data/corruption, 4 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BendError::Input(_) | BendError::Config(_) | BendError::Shape(_) => 2,
            BendError::Format { .. } | BendError::Corrupt { .. } | BendError::Version { .. } | BendError::Io { .. } => {
                3
            }
            BendError::Numeric(_) | BendError::UndefinedBreakEven(_) => 4,
        }
    }
}
