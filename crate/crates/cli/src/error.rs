use std::fmt;

use typical_table::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input files (exit 1).
    Usage(String),
    /// Reading or writing files (exit 1).
    Io(String),
    /// The solver did not converge (exit 2).
    Solver(String),
    /// The counting memo outgrew its budget (exit 3).
    Budget(String),
    /// The rejection sampler ran out of attempts (exit 4).
    Sampler(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Sampler(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Budget(m) => write!(f, "budget error: {m}"),
            CliError::Sampler(m) => write!(f, "sampler error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e {
            Error::NoConvergence { .. } | Error::DomainViolation(_) => CliError::Solver(text),
            Error::BudgetExceeded { .. } | Error::CapExceeded { .. } => CliError::Budget(text),
            Error::AttemptsExhausted(_) => CliError::Sampler(text),
            _ => CliError::Usage(text),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
