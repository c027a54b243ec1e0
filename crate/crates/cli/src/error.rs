use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{key} {message}")]
    Validation { key: String, message: String },

    #[error("{key}: {source}")]
    Core {
        key: String,
        #[source]
        source: innokde::Error,
    },

    #[error("{0}")]
    Numerical(String),

    #[error("writing {path}: {source}", path = path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 1,
            CliError::Core { source, .. } => match source {
                e if e.is_numerical() => 2,
                innokde::Error::Io(_) => 2,
                _ => 1,
            },
            CliError::Numerical(_) | CliError::Io { .. } => 2,
        }
    }

    #[cfg(test)]
    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Validation { key, .. } | CliError::Core { key, .. } => Some(key),
            _ => None,
        }
    }
}
