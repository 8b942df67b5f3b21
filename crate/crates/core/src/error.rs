use std::path::PathBuf;

/// Errors produced by `lpr-core`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("weights: {0}")]
    Weights(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("annotation line {line}: {message}")]
    Annotation { line: usize, message: String },

    #[error("layout rules: {0}")]
    Rules(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
