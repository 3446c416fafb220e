//! Mini-batch training with the Adam update rule.

use serde::{Deserialize, Serialize};

use super::DifferentiableModel;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::math::{argmax_row, Matrix, SeededRng};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

/// One line of the training log.
///
/// `mean_loss` and `accuracy` describe the batches the update was computed on
/// (adversarial batches during adversarial training). The `clean_*` fields
/// are only filled in by adversarial training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_clean_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

struct Adam {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(shapes: &[usize]) -> Self {
        Self {
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, params: Vec<&mut Matrix>, grads: &[Matrix], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            for (j, (pv, &gv)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * gv;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * gv * gv;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Trains `model` on the labeled `dataset`. Batches are drawn from a fresh
/// permutation per epoch; the run is fully determined by `rng`'s seed.
pub fn train<M: DifferentiableModel>(
    model: &mut M,
    dataset: &Dataset,
    options: &TrainOptions,
    rng: &mut SeededRng,
) -> Result<TrainingLog> {
    fit(model, dataset, options, rng, None)
}

/// Replaces a clean batch with the batch actually used for the update.
/// Arguments: model, clean batch, labels, global batch counter.
pub(crate) type BatchTransform<'a, M> =
    dyn FnMut(&M, &Matrix, &[usize], u64) -> Result<Matrix> + 'a;

/// Shared loop behind [`train`] and adversarial training.
pub(crate) fn fit<M: DifferentiableModel>(
    model: &mut M,
    dataset: &Dataset,
    options: &TrainOptions,
    rng: &mut SeededRng,
    mut transform: Option<&mut BatchTransform<'_, M>>,
) -> Result<TrainingLog> {
    options.validate()?;
    let labels = dataset.require_labels("training")?;
    if dataset.dim() != model.input_dim() {
        return invalid(format!(
            "dataset has {} features, model expects {}",
            dataset.dim(),
            model.input_dim()
        ));
    }
    if dataset.is_empty() {
        return invalid("cannot train on an empty dataset");
    }
    let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(&shapes);
    let mut log = TrainingLog::default();
    let mut counter: u64 = 0;
    for epoch in 0..options.epochs {
        let order = rng.permutation(dataset.len());
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut clean_loss_sum = 0.0;
        let mut clean_correct = 0usize;
        for idx in order.chunks(options.batch_size) {
            let clean = dataset.features().select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let batch = match transform.as_mut() {
                Some(f) => {
                    let adv = f(model, &clean, &y, counter)?;
                    let probs = model.predict(&clean)?;
                    clean_loss_sum += super::cross_entropy_loss(&probs, &y)? * idx.len() as f64;
                    clean_correct += count_correct(&probs, &y);
                    adv
                }
                None => clean,
            };
            counter += 1;
            let lg = model.loss_and_gradients(&batch, &y)?;
            loss_sum += lg.loss * idx.len() as f64;
            correct += count_correct(&lg.probabilities, &y);
            adam.update(
                model.parameters_mut(),
                &lg.parameter_gradients,
                options.learning_rate,
            );
        }
        let n = dataset.len() as f64;
        let adversarial = transform.is_some();
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            mean_loss: loss_sum / n,
            accuracy: correct as f64 / n,
            mean_clean_loss: adversarial.then_some(clean_loss_sum / n),
            clean_accuracy: adversarial.then_some(clean_correct as f64 / n),
        });
    }
    Ok(log)
}

fn count_correct(probs: &Matrix, labels: &[usize]) -> usize {
    probs
        .row_iter()
        .zip(labels)
        .filter(|(row, &l)| argmax_row(row).ok() == Some(l))
        .count()
}

/// Fraction of `dataset` classified correctly.
pub fn accuracy<M: super::BlackBoxModel + ?Sized>(model: &M, dataset: &Dataset) -> Result<f64> {
    let labels = dataset.require_labels("accuracy")?;
    if dataset.is_empty() {
        return invalid("accuracy of an empty dataset");
    }
    let probs = model.predict(dataset.features())?;
    Ok(count_correct(&probs, labels) as f64 / dataset.len() as f64)
}
