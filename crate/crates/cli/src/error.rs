use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] fluctlab::Error),
}

impl CliError {
    /// 2 config, 3 numeric failure, 4 model inconsistency.
    pub fn exit_code(&self) -> u8 {
        use fluctlab::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Core(e) => match e {
                E::ModelInconsistency(_) => 4,
                E::PositivityFailure { .. }
                | E::NonFinite { .. }
                | E::FitFailure { .. }
                | E::FitInitialisation(_)
                | E::SeriesTruncation { .. }
                | E::NotHermitian { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
