//! Small deterministic numeric kernel shared by every trainer in the crate.
//!
//! Everything is `f64`. The data sets are tiny and the gradient checks need
//! the headroom.

mod activation;
mod gradcheck;
mod matrix;
mod optim;
mod rng;

pub use activation::{argmax, log_sum_exp, relu, sigmoid, sigmoid_bce, softmax, softmax_in_place, BceOutput};
pub use gradcheck::{finite_diff_check, BlockReport, GradCheckOptions, GradCheckReport, ParamBlock};
pub use matrix::Matrix;
pub use optim::{optimizer_step, AdamHyper, OptimizerRule, OptimizerState};
pub use rng::RngState;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Relative error used by the gradient checker:
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
