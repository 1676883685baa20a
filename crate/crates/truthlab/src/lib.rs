//! Document formats, run manifests and the command implementations behind
//! the `truthlab` binary.

#![allow(clippy::result_large_err)]

pub mod cli;
pub mod docs;
pub mod manifest;
pub mod suites;

use truthlab_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    /// A check failed or the pipeline found no witness.
    pub const NEGATIVE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
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
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Parse { .. } => exit::USAGE,
            CliError::Write { .. } => exit::INTERNAL,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

/// Exit code for a library error.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidConfig(_)
        | CoreError::InvalidInstance(_)
        | CoreError::InvalidSpec(_)
        | CoreError::InvalidAllocation(_)
        | CoreError::BadDeviation(_)
        | CoreError::PreconditionViolated(_) => exit::USAGE,
        CoreError::NoNiceStar(_)
        | CoreError::BoxNotFound { .. }
        | CoreError::InsufficientMultiplicity { .. } => exit::NEGATIVE,
        _ => exit::INTERNAL,
    }
}

pub type CliResult<T> = Result<T, CliError>;
