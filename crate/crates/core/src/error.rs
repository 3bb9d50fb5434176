use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators, the propagation engine and the sweep driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("outside the domain of validity: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("norm drifted by {drift:.3e} at t = {t:.4}")]
    Divergence { drift: f64, t: f64 },

    #[error("no plateau before t = {t:.4}: {reason}")]
    NonConvergence { t: f64, reason: String },

    #[error("trajectory started at {x_init} entered a masked region at t = {t:.4} (x = {x})")]
    TrajectoryLost { x_init: f64, x: f64, t: f64 },

    #[error("{lost} of {total} trajectories were lost")]
    TooManyLost { lost: usize, total: usize },

    #[error("no transmitted trajectory in the scan range [{lo}, {hi}]")]
    NoTransmission { lo: f64, hi: f64 },

    #[error("no reflected trajectory in the scan range [{lo}, {hi}]")]
    NoReflection { lo: f64, hi: f64 },

    #[error("reference transmission is zero")]
    ZeroReference,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(name: &'static str, ok: bool, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason(),
        })
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
