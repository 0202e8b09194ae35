use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CLAIM: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] avgov::Error),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("claim failed: {0}")]
    Claim(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(avgov::Error::EnumerationGuard { .. } | avgov::Error::SearchGuard { .. }) => EXIT_GUARD,
            CliError::Claim(_) => EXIT_CLAIM,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
