use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DartError>;

#[derive(Debug, Error)]
pub enum DartError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Invalid or incomplete configuration; detected before any data is touched.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is present but unusable (empty class, empty database, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DartError>,
    },
}

impl DartError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DartError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        DartError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ DartError::Stage { .. } => e,
            e => DartError::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// True when the root cause is a configuration problem rather than bad data.
    pub fn is_config(&self) -> bool {
        match self {
            DartError::Config(_) => true,
            DartError::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
