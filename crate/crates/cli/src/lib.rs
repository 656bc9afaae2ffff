//! Library half of the command-line front end: configuration parsing and
//! the command implementations, kept callable for tests.

pub mod commands;
pub mod config;

/// CLI-level errors, categorized for exit codes: configuration problems
/// exit with 2, missing upstream artifacts with 3, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    MissingArtifact(String),
    Other(cityfed_core::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::MissingArtifact(msg) => write!(f, "missing artifact: {msg}"),
            CliError::Other(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cityfed_core::Error> for CliError {
    fn from(e: cityfed_core::Error) -> Self {
        match e {
            cityfed_core::Error::MissingArtifact(msg) => CliError::MissingArtifact(msg),
            other => CliError::Other(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}
