//! File formats, experiment runner and command line for `dsgc-core`.

pub mod cli;
pub mod config;
pub mod output;
pub mod runner;
pub mod tu;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}:{line}: {message}", file.display())]
    Parse { file: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dsgc_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// 2 for bad input (parse, config, usage), 3 for a diverged run, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Usage(_) => 2,
            Error::Core(dsgc_core::Error::NonFinite { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
