use std::path::PathBuf;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad shapes, out-of-range settings, or an unusable maze.
    #[error("configuration error: {0}")]
    Config(String),

    /// A probability-valued input fell outside `[0, 1]`.
    #[error("domain error: {0}")]
    Domain(String),

    /// A loss or estimate became non-finite during training.
    #[error("numerical abort at epoch {epoch}: {detail}")]
    Numerical {
        epoch: usize,
        detail: String,
        dump: Option<PathBuf>,
    },

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
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
