use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The variants map onto the command-line exit codes: parse, ordering, data,
/// config, artifact and I/O problems are data errors; size errors are usage
/// or data errors depending on where they originate; degenerate-data errors
/// are numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: timestamp {timestamp} is not strictly increasing")]
    Ordering { line: usize, timestamp: i64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    pub(crate) fn artifact(msg: impl Into<String>) -> Self {
        Error::Artifact(msg.into())
    }
}
