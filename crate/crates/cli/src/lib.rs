//! Experiment drivers and output helpers behind the `sosub` command.

pub mod config;
pub mod experiments;
pub mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unparseable or out-of-range input.
    #[error("{0}")]
    Usage(String),
    /// A bound or density computation failed.
    #[error("{0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 1,
        }
    }
}
