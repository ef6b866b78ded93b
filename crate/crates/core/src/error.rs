use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected n = {expected}, got n = {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("coefficient set does not belong to this shearlet system")]
    SystemMismatch,

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("field file size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{failed} of {total} frequency solves failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("iteration diverged: objective increased for {0} consecutive steps")]
    Diverged(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
