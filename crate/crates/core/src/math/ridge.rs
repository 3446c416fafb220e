//! Weighted ridge regression with an unpenalized intercept.
//!
//! The intercept is removed by weighted centering, which leaves a `d × d`
//! system `(AᵀA + λI) w = Aᵀy` over the centered, weight-scaled design `A`.
//! That system is solved by Cholesky factorization; when a pivot collapses
//! (rank-deficient design with `λ = 0`) the minimum-norm least-squares solution
//! is taken from an SVD of the augmented design instead.

use nalgebra::{DMatrix, DVector};

use super::matrix::{dot, gemm, Matrix, Operand};
use crate::error::{invalid, Result};

/// Relative pivot size below which the Cholesky route gives up.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Coefficients of a fitted linear surrogate `w·z + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// False when the singular-system fallback produced the solution.
    pub used_cholesky: bool,
}

impl RidgeFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }
}

/// Minimizes `Σ_j s_j (w·z_j + b − t_j)² + λ‖w‖²` over `(w, b)`.
pub fn solve_ridge(
    design: &Matrix,
    targets: &[f64],
    sample_weights: &[f64],
    lambda: f64,
) -> Result<RidgeFit> {
    let (k, d) = design.shape();
    if k == 0 {
        return invalid("ridge: design has no rows");
    }
    if targets.len() != k || sample_weights.len() != k {
        return invalid(format!(
            "ridge: design has {k} rows but {} targets and {} sample weights",
            targets.len(),
            sample_weights.len()
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!(
            "ridge: lambda must be finite and >= 0, got {lambda}"
        ));
    }
    if sample_weights
        .iter()
        .any(|&s| !(s >= 0.0) || !s.is_finite())
    {
        return invalid("ridge: sample weights must be finite and nonnegative");
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return invalid("ridge: targets must be finite");
    }
    let total: f64 = sample_weights.iter().sum();
    if total <= 0.0 {
        return invalid("ridge: sample weights are all zero");
    }

    let mut x_mean = vec![0.0; d];
    let mut t_mean = 0.0;
    for (j, row) in design.row_iter().enumerate() {
        let s = sample_weights[j];
        if s == 0.0 {
            continue;
        }
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += s * v;
        }
        t_mean += s * targets[j];
    }
    x_mean.iter_mut().for_each(|m| *m /= total);
    t_mean /= total;
    let mut active = targets.iter().zip(sample_weights).filter(|(_, &s)| s > 0.0);
    if let Some((&first, _)) = active.next() {
        if active.all(|(&t, _)| t == first) {
            // Keeps constant targets exact: zero weights, intercept = the constant.
            t_mean = first;
        }
    }

    if d == 0 {
        return Ok(RidgeFit {
            weights: Vec::new(),
            intercept: t_mean,
            used_cholesky: true,
        });
    }

    // Centered rows scaled by sqrt(s_j).
    let mut scaled = Vec::with_capacity(k * d);
    let mut response = Vec::with_capacity(k);
    for (j, row) in design.row_iter().enumerate() {
        let r = sample_weights[j].sqrt();
        scaled.extend(row.iter().zip(&x_mean).map(|(v, m)| r * (v - m)));
        response.push(r * (targets[j] - t_mean));
    }

    let mut gram = vec![0.0; d * d];
    gemm(
        d,
        k,
        d,
        Operand::raw(&scaled, d, true),
        Operand::raw(&scaled, d, false),
        &mut gram,
        false,
    );
    for i in 0..d {
        gram[i * d + i] += lambda;
    }
    let mut rhs = vec![0.0; d];
    gemm(
        d,
        k,
        1,
        Operand::raw(&scaled, d, true),
        Operand::raw(&response, 1, false),
        &mut rhs,
        false,
    );

    let (weights, used_cholesky) = match cholesky_solve(&mut gram, &rhs, d) {
        Some(w) => (w, true),
        None => (min_norm_solve(&scaled, &response, k, d, lambda), false),
    };
    let intercept = t_mean - dot(&weights, &x_mean);
    Ok(RidgeFit {
        weights,
        intercept,
        used_cholesky,
    })
}

/// Factors the symmetric `a` in place (lower triangle) and solves `a x = b`.
/// Returns `None` when a pivot is not safely positive.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let tol = PIVOT_TOLERANCE * max_diag;
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = a.split_at_mut(i * n);
            let row_i = &mut tail[..n];
            let s = if j == i {
                row_i[j] - dot(&row_i[..j], &row_i[..j])
            } else {
                let row_j = &head[j * n..j * n + n];
                (row_i[j] - dot(&row_i[..j], &row_j[..j])) / row_j[j]
            };
            if j == i {
                if !(s > tol) {
                    return None;
                }
                row_i[i] = s.sqrt();
            } else {
                row_i[j] = s;
            }
        }
    }
    // L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &a[i * n..i * n + n];
        y[i] = (b[i] - dot(&row[..i], &y[..i])) / row[i];
    }
    // Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for r in i + 1..n {
            s -= a[r * n + i] * x[r];
        }
        x[i] = s / a[i * n + i];
    }
    Some(x)
}

/// Minimum-norm solution of `min ‖A w − y‖² + λ‖w‖²` via SVD of `[A; √λ I]`.
fn min_norm_solve(scaled: &[f64], response: &[f64], k: usize, d: usize, lambda: f64) -> Vec<f64> {
    let extra = if lambda > 0.0 { d } else { 0 };
    let root = lambda.sqrt();
    let a = DMatrix::from_fn(k + extra, d, |r, c| {
        if r < k {
            scaled[r * d + c]
        } else if r - k == c {
            root
        } else {
            0.0
        }
    });
    let y = DVector::from_fn(k + extra, |r, _| if r < k { response[r] } else { 0.0 });
    let svd = a.svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return vec![0.0; d];
    }
    let eps = largest * (k + extra).max(d) as f64 * f64::EPSILON;
    match svd.solve(&y, eps) {
        Ok(w) => w.iter().copied().collect(),
        Err(_) => vec![0.0; d],
    }
}
