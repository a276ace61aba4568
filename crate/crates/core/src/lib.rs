//! Drive-circuit modeling, current-loop synthesis, loop analysis and
//! position control for a rotary actuator with magnetic restoration.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod defaults;
pub mod drive;
pub mod fl;
pub mod loops;
pub mod lti;
pub mod plant;
pub mod plot;
pub mod position;
pub mod sim;

use num_complex::Complex64;
use thiserror::Error;

pub use lti::LtiError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("invalid configuration at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("design failed: {0}")]
    Design(String),
    #[error("{what} matrix has rank {rank} of {n}")]
    RankDeficient { what: &'static str, rank: usize, n: usize },
    #[error(
        "forward-Euler update unstable: eigenvalue {eig} maps outside the unit circle; \
         largest stable sampling period is {max_ts:e} s"
    )]
    UnstableDiscretization { eig: Complex64, max_ts: f64 },
    #[error("theta = {theta} rad lies inside the cos(theta) singularity guard band")]
    Singularity { theta: f64 },
    #[error("simulation diverged; last finite state at t = {t_last} s")]
    Divergence { t_last: f64, partial: Box<sim::SimTrace> },
    #[error("step metrics: {0}")]
    Metric(String),
    #[error("plot: {0}")]
    Plot(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Formats a value with nine significant digits.
pub fn fmt_sig(x: f64) -> String {
    format!("{:.8e}", x)
}

pub(crate) fn check_positive(path: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and positive, got {x}")))
    }
}

pub(crate) fn check_non_negative(path: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and non-negative, got {x}")))
    }
}
