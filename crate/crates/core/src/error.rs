use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse document {doc_id}: {reason}")]
    Parse { doc_id: String, reason: String },

    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("case base is incompatible with the active lexicon: {0}")]
    Compatibility(String),

    #[error("build failed: {0}")]
    Build(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error was caused by bad user input (files, flags) rather
    /// than by an internal inconsistency.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Dimension { .. })
    }
}
