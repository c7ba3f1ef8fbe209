use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    /// Schema or config rule violated; `path` is a JSON path such as `$.nodes[0].files`.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("{file}, row {row}: {message}")]
    Data {
        file: String,
        row: usize,
        message: String,
    },

    #[error("missing column `{column}` in {file}")]
    MissingColumn { column: String, file: String },

    #[error("unknown node ids for {node_type}: {ids:?}")]
    UnknownIds { node_type: String, ids: Vec<String> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("partition manifest mismatch: {0}")]
    Manifest(String),

    #[error("checkpoint incompatible: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("worker failure: {0}")]
    Worker(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
