//! Dense linear algebra, seeded sampling and the ridge solver.

mod matrix;
mod ridge;
mod rng;

pub use matrix::{argmax_row, Matrix};
pub(crate) use matrix::{dot, gemm, Operand};
pub use ridge::{solve_ridge, RidgeFit};
pub use rng::{fingerprint, sample_gaussian, SeededRng};
