use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or time outside the region where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Invalid configuration; `path` is the dotted field path of the offending entry.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
