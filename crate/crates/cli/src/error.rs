use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI invocation, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration could not be read or is invalid (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),

    /// The simulation or calibration failed (exit code 1).
    #[error("{0}")]
    Runtime(#[from] seqmt::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Output { .. } => 1,
        }
    }
}
