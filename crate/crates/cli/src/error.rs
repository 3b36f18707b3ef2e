use std::path::PathBuf;

use thiserror::Error;

pub mod exit {
    pub const OK: i32 = 0;
    pub const UNREADABLE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const INCONSISTENT: i32 = 3;
    pub const MISMATCH: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("schema: {0}")]
    Schema(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] odsbounds::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::UNREADABLE,
            CliError::Write { .. } => exit::UNREADABLE,
            CliError::Core(e) if e.is_inconsistent_instance() => exit::INCONSISTENT,
            _ => exit::VALIDATION,
        }
    }
}
