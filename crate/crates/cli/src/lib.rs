//! Batch driver for the `born` command.
//!
//! Exit codes: 0 all checks pass, 1 a verification failed, 2 the
//! configuration is invalid, 3 a series diverged, 4 I/O or format errors.

pub mod config;
pub mod pipeline;

pub use config::{Diagnostic, RunConfig};
pub use pipeline::{Outcome, RunError, RunResult, Status};

use born_core::Error;

pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(result: &RunResult<Outcome>) -> i32 {
    match result {
        Ok(o) => match o.status {
            Status::Pass => 0,
            Status::Fail => EXIT_FAIL,
            Status::Diverged => EXIT_DIVERGED,
        },
        Err(RunError::Config(_)) => EXIT_CONFIG,
        Err(RunError::Core(e)) => match e {
            Error::InvalidGrid(_)
            | Error::InvalidField(_)
            | Error::InvalidPotential(_)
            | Error::InvalidConfig(_)
            | Error::Degenerate(_)
            | Error::OracleTooLarge(_) => EXIT_CONFIG,
            Error::Divergence { .. } | Error::NonConvergence { .. } => EXIT_DIVERGED,
            _ => EXIT_IO,
        },
        Err(RunError::Json(_)) => EXIT_IO,
    }
}

/// Reads and parses a config file. Parse failures come back as diagnostics.
pub fn load_config(path: &std::path::Path) -> RunResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    RunConfig::from_json(&text).map_err(RunError::Config)
}
