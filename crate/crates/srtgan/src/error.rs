use std::path::{Path, PathBuf};

/// Errors of the file-format and command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] srtgan_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// A bad configuration file or flag value (exit code 2).
    #[error("{0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 for configuration and usage problems, 1 for
    /// everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Core(srtgan_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}
