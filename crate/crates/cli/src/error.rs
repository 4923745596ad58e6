use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),

    #[error("hypothesis refusal: {0}")]
    Refused(String),

    #[error("run terminated early: {0}")]
    Terminated(String),

    #[error(transparent)]
    Core(#[from] nmcf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::MissingArtifacts(_) => ExitCode::from(2),
            CliError::Refused(_) => ExitCode::from(3),
            CliError::Terminated(_) | CliError::Core(_) => ExitCode::from(1),
        }
    }
}
