//! Config parsing and batch runs behind the `weakgeo` binary.
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use weakgeo::GeoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    #[error("{0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(GeoError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

/// Worker threads from `WEAKGEO_THREADS` (0 = serial); all cores when unset.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("WEAKGEO_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("WEAKGEO_THREADS must be an integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
