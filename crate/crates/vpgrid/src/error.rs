use std::path::PathBuf;

/// Errors produced by the vpgrid pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on a value or an operation was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A file could not be parsed; `offset` is the byte position where
    /// parsing failed, when known.
    #[error("parse error at byte {offset}: {msg}")]
    Parse { msg: String, offset: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(msg: impl Into<String>, offset: usize) -> Self {
        Error::Parse {
            msg: msg.into(),
            offset,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
