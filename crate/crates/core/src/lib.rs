//! Label-free robustness scoring for black-box classifiers.
//!
//! A model's brittle-score is the mean L1 norm of its local linear (LIME)
//! explanation weights over a set of unlabeled inputs, divided by the input
//! dimension. Lower scores indicate models that are harder to attack. The
//! crate also carries the white-box machinery used to check that claim:
//! small differentiable classifiers, FGSM/PGD attacks, robust accuracy and
//! adversarial training.

pub mod attacks;
pub mod data;
pub mod error;
pub mod lime;
pub mod math;
pub mod models;
pub mod plot;
pub mod scoring;

pub use error::{Error, Result};
pub use math::{Matrix, SeededRng};
