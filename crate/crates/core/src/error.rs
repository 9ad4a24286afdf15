use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = OvalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OvalError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("unknown tool `{name}` (probed: {})", format_paths(probed))]
    UnknownTool { name: String, probed: Vec<PathBuf> },

    #[error("tool `{name}` does not implement the `{interface}` interface")]
    UnsupportedInterface { name: String, interface: String },

    #[error("requested version `{version}` is not installed: {} does not exist", path.display())]
    VersionNotInstalled { version: String, path: PathBuf },

    #[error("version `{requested}` requested but already dispatched to version `{running}`")]
    DispatchLoop { requested: String, running: String },

    #[error("version `{version}` requested but OVAL_DIR is not set")]
    NoInstallRoot { version: String },

    #[error("nothing to validate: {} does not exist", path.display())]
    NothingToValidate { path: PathBuf },

    #[error("target `{0}` is not declared in any OvalFile")]
    UnknownTarget(String),

    #[error("unknown command `{command}` (available: {})", available.join(", "))]
    UnknownCommand {
        command: String,
        available: Vec<String>,
    },

    #[error("{0}")]
    Usage(String),
}

impl OvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        OvalError::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
