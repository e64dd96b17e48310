use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] xebsim_core::Error),
    #[error(transparent)]
    Collapse(#[from] xebsim_collapse::CollapseError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit codes: 0 success, 1 audit or recipe failure, 2 configuration or
/// input error, 3 recipe inconclusive (over budget).
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(EXIT_CONFIG)
    }
}
