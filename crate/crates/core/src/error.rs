use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, length, state).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty swarm")]
    EmptySwarm,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("buffer underfilled: {size} stored, {requested} requested")]
    BufferUnderfilled { size: usize, requested: usize },

    #[error("checkpoint header mismatch: {0}")]
    CheckpointHeader(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
