//! Configuration, experiment runners and the invariant suite behind the
//! `insider` command-line tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{failures} invariant check(s) failed")]
    InvariantFailure { failures: usize },
}

impl HarnessError {
    /// Process exit status: 1 invariant failure, 2 configuration or i/o
    /// problem, 3 numerical error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::InvariantFailure { .. } => 1,
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}
