use std::io;

use thiserror::Error;

/// Errors raised by the numerical core and the command-line layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid is not uniform (node {index} deviates by {deviation:e})")]
    NonUniformGrid { index: usize, deviation: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density {value:e} at x = {x} is below the positivity floor")]
    PositivityFloor { x: f64, value: f64 },

    #[error("unknown target '{0}'")]
    UnknownTarget(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error(
        "{failed} of {total} paths became non-finite; the drift is too stiff for this \
         scheme and time step (try scheme=implicit or a smaller dt)"
    )]
    Stiffness { failed: usize, total: usize },

    #[error("rejection envelope too loose at x = {x}: acceptance {acceptance:e}")]
    EnvelopeFailure { x: f64, acceptance: f64 },

    #[error("CFL violation: courant number {courant} exceeds {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("negative mass {mass:e} exceeds clip tolerance")]
    NegativeMass { mass: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::UnknownTarget(_)
            | Error::Config(_)
            | Error::Parse(_)
            | Error::GridMismatch(_)
            | Error::NonUniformGrid { .. }
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
