use std::path::PathBuf;

use thiserror::Error;

/// Failures of the file formats, the pipeline and the command line.
#[derive(Debug, Error)]
pub enum QpdeError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("missing artifact {0} (run the earlier stage first)")]
    MissingArtifact(PathBuf),
    #[error("corrupt container {path}: {message}")]
    Container { path: String, message: String },
    #[error(transparent)]
    Numerical(#[from] qpde_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serialize(String),
}

impl QpdeError {
    /// 2 for bad input, 3 for missing artifacts, 4 for numerical or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            QpdeError::Config(_) | QpdeError::Parse { .. } => 2,
            QpdeError::MissingArtifact(_) | QpdeError::Container { .. } => 3,
            QpdeError::Numerical(_) | QpdeError::Io { .. } | QpdeError::Serialize(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QpdeError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for QpdeError {
    fn from(e: serde_json::Error) -> Self {
        QpdeError::Serialize(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QpdeError>;
