use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: packet {packet}: {message}")]
    Validation {
        path: PathBuf,
        packet: usize,
        message: String,
    },

    #[error("MCS index {0} outside 1..=6")]
    McsOutOfRange(usize),

    #[error("MCS undefined for an empty resource block set")]
    UndefinedMcs,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
