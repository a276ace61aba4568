//! Polynomials, rational transfer functions, state-space models and
//! frequency responses.

mod freq;
mod poly;
mod ss;
mod tf;

use num_complex::Complex64;
use thiserror::Error;

pub use freq::{
    apply_delay, bandwidth_3db, bandwidth_3db_of, bode, log_grid, margins, margins_delayed, margins_in,
    margins_of, wrap_deg, FrequencyResponse,
    Margins, FRF_CSV_HEADER, POINTS_PER_DECADE, SEARCH_SPAN_HZ,
};
pub use poly::{Polynomial, MAX_ROOT_ITERATIONS, ROOT_RESIDUAL_TOL};
pub use ss::{char_poly, eigenvalues, StateSpaceModel};
pub use tf::RationalTF;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("evaluation at s = {s} hits a pole")]
    PoleEvaluation { s: Complex64 },
    #[error("1 + loop transmission is identically zero")]
    SingularLoop,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no unity-gain crossover between {f_lo} Hz and {f_hi} Hz")]
    NoCrossover { f_lo: f64, f_hi: f64 },
    #[error("root finder did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
}
