use thiserror::Error;

/// Failures of a harness run, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    /// A numerical routine failed while the suites were running.
    #[error("solver: {0}")]
    Solver(#[from] spinlab::Error),

    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Output(m) => m.clone(),
            CliError::Solver(e) => e.to_string(),
        }
    }
}
