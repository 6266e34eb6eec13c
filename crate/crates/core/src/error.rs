use thiserror::Error;

/// Errors surfaced by the simulation, learning and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("sequencing error: expected timestamp {expected}, found {found}")]
    Sequencing { expected: i64, found: i64 },
    #[error("lifecycle error: {0}")]
    Lifecycle(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("checkpoint integrity error: {field}: expected {expected}, found {found}")]
    Integrity {
        field: String,
        expected: String,
        found: String,
    },
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
