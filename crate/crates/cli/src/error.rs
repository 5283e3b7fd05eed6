use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: frame is {got_w}x{got_h}, expected {want_w}x{want_h}", path.display())]
    MixedSize {
        path: PathBuf,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("no frames found in {}", .0.display())]
    NoFrames(PathBuf),
    #[error("{0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Engine(#[from] activecircle::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short failure-class tag used in one-line diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Image { .. } | CliError::MixedSize { .. } | CliError::NoFrames(_) => "input",
            CliError::Config(_) => "config",
            CliError::Csv { .. } => "csv",
            CliError::Engine(_) => "engine",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
