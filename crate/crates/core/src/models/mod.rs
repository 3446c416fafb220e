//! The black-box prediction interface and the built-in differentiable
//! classifiers (linear, MLP, small CNNs) used to generate ground truth.

mod checkpoint;
mod layers;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use layers::{ConvGeometry, PoolGeometry};
pub use network::{linear_oracle_model, ArchitectureSpec, Network};
pub(crate) use train::fit;
pub use train::{accuracy, train, EpochRecord, TrainOptions, TrainingLog};

use crate::error::{invalid, Result};
use crate::math::Matrix;

/// Probability floor applied before taking logs in the cross-entropy loss.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// A classifier that can only be queried.
///
/// `predict` maps a `b × input_dim` batch to `b × num_classes` rows of class
/// probabilities (nonnegative, summing to one) and is deterministic: the same
/// batch always yields the same bits, and each output row depends only on its
/// input row.
pub trait BlackBoxModel: Send + Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn predict(&self, batch: &Matrix) -> Result<Matrix>;

    fn model_id(&self) -> String {
        "model".to_string()
    }
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        (**self).predict(batch)
    }

    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for Box<M> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        (**self).predict(batch)
    }

    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

/// Mean cross-entropy with the parameter gradients that produced it.
#[derive(Clone, Debug)]
pub struct LossGradients {
    pub loss: f64,
    pub probabilities: Matrix,
    /// Same order as [`DifferentiableModel::parameters`].
    pub parameter_gradients: Vec<Matrix>,
}

/// A white-box model: gradients with respect to inputs and parameters.
pub trait DifferentiableModel: BlackBoxModel {
    /// Row `i` is the gradient of sample `i`'s own cross-entropy loss with
    /// respect to input row `i` (not scaled by the batch size).
    fn input_gradient(&self, batch: &Matrix, labels: &[usize]) -> Result<Matrix>;

    /// Mean cross-entropy over the batch and its parameter gradients.
    fn loss_and_gradients(&self, batch: &Matrix, labels: &[usize]) -> Result<LossGradients>;

    fn parameters(&self) -> Vec<&Matrix>;
    fn parameters_mut(&mut self) -> Vec<&mut Matrix>;
}

/// A model that returns the same probability vector for every input.
#[derive(Clone, Debug)]
pub struct ConstantModel {
    input_dim: usize,
    probabilities: Vec<f64>,
}

impl ConstantModel {
    pub fn new(input_dim: usize, probabilities: Vec<f64>) -> Result<Self> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.is_empty()
            || probabilities.iter().any(|&p| !(p >= 0.0))
            || (sum - 1.0).abs() > 1e-9
        {
            return invalid("constant model needs a probability vector");
        }
        Ok(Self {
            input_dim,
            probabilities,
        })
    }
}

impl BlackBoxModel for ConstantModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.probabilities.len()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        validate_batch(batch, self.input_dim)?;
        let mut out = Vec::with_capacity(batch.rows() * self.probabilities.len());
        for _ in 0..batch.rows() {
            out.extend_from_slice(&self.probabilities);
        }
        Matrix::from_vec(batch.rows(), self.probabilities.len(), out)
    }

    fn model_id(&self) -> String {
        "constant".to_string()
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean of `−ln p[label]` with probabilities floored at [`PROBABILITY_FLOOR`].
pub fn cross_entropy_loss(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != probs.rows() {
        return invalid(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probs.rows()
        ));
    }
    if probs.rows() == 0 {
        return invalid("cross-entropy of an empty batch");
    }
    let mut total = 0.0;
    for (row, &label) in probs.row_iter().zip(labels) {
        if label >= row.len() {
            return invalid(format!(
                "label {label} out of range for {} classes",
                row.len()
            ));
        }
        total -= row[label].max(PROBABILITY_FLOOR).ln();
    }
    Ok(total / probs.rows() as f64)
}

/// Per-sample cross-entropy, same floor as [`cross_entropy_loss`].
pub fn per_sample_loss(probs: &Matrix, labels: &[usize]) -> Vec<f64> {
    probs
        .row_iter()
        .zip(labels)
        .map(|(row, &l)| -row[l].max(PROBABILITY_FLOOR).ln())
        .collect()
}

pub(crate) fn validate_batch(batch: &Matrix, input_dim: usize) -> Result<()> {
    if batch.cols() != input_dim {
        return invalid(format!(
            "batch has {} columns, model expects {input_dim}",
            batch.cols()
        ));
    }
    Ok(())
}

pub(crate) fn validate_labeled(
    batch: &Matrix,
    labels: &[usize],
    input_dim: usize,
    num_classes: usize,
) -> Result<()> {
    validate_batch(batch, input_dim)?;
    if labels.len() != batch.rows() {
        return invalid(format!("{} labels for {} rows", labels.len(), batch.rows()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
        return invalid(format!(
            "label {bad} out of range for {num_classes} classes"
        ));
    }
    Ok(())
}
