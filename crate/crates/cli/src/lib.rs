//! Command-line front end of `rll2d`.

pub mod config;
pub mod run;

use thiserror::Error;

pub use config::{parse_and_validate, Command, RunConfig};
pub use run::{execute, RunReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(clap::Error),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for anything wrong with the request, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Validation { .. } => 1,
            CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}
