//! White-box l∞ attacks (FGSM, PGD), robust accuracy and adversarial training.
//!
//! All perturbations stay inside the ε-ball around the clean input and inside
//! the pixel box `[0, 1]^d`. Attacks are untargeted: they ascend the
//! cross-entropy of the true label.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::math::{argmax_row, Matrix, SeededRng};
use crate::models::{fit, BlackBoxModel, DifferentiableModel, TrainOptions, TrainingLog};

/// Rows attacked together by [`robust_accuracy`]; each chunk has its own
/// random stream.
const EVAL_CHUNK: usize = 100;

/// Perturbation norm. Only `linf` is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Linf,
    L2,
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub norm: Norm,
    /// Radius in pixel units (`[0, 1]` scale).
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
    pub seed: u64,
}

impl AttackConfig {
    /// Ten steps of size `2.5·ε/10` from a random start.
    pub fn linf(epsilon: f64) -> Self {
        let steps = 10;
        Self {
            norm: Norm::Linf,
            epsilon,
            steps,
            step_size: 2.5 * epsilon / steps as f64,
            random_start: true,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `ε ≥ 0`, `steps ≥ 1`, `step_size > 0` (zero is accepted when `ε = 0`,
    /// where every step projects back onto the input anyway).
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return invalid(format!("epsilon {} must be finite and >= 0", self.epsilon));
        }
        if self.steps == 0 {
            return invalid("attack needs at least one step");
        }
        let step_ok = self.step_size > 0.0 || (self.epsilon == 0.0 && self.step_size == 0.0);
        if !step_ok || !self.step_size.is_finite() {
            return invalid(format!("step size {} must be > 0", self.step_size));
        }
        if self.norm != Norm::Linf {
            return invalid(format!("norm {:?} is not supported; only linf", self.norm));
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `clip_[0,1](x + ε·sign(grad))` with `sign(0) = 0`.
pub fn signed_step(x: &Matrix, grad: &Matrix, epsilon: f64) -> Result<Matrix> {
    if x.shape() != grad.shape() {
        return invalid("gradient shape differs from input shape");
    }
    let values = x
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&xv, &g)| (xv + epsilon * sign(g)).clamp(0.0, 1.0))
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), values)
}

/// Fast gradient sign method.
pub fn fgsm<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &Matrix,
    labels: &[usize],
    epsilon: f64,
) -> Result<Matrix> {
    if !(epsilon >= 0.0) {
        return invalid(format!("epsilon {epsilon} must be >= 0"));
    }
    let grad = model.input_gradient(x, labels)?;
    signed_step(x, &grad, epsilon)
}

/// Projected gradient ascent in `B∞(x, ε) ∩ [0, 1]^d`, seeded by `config.seed`.
pub fn pgd<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &Matrix,
    labels: &[usize],
    config: &AttackConfig,
) -> Result<Matrix> {
    pgd_with_rng(model, x, labels, config, &mut SeededRng::new(config.seed))
}

/// [`pgd`] drawing its random start from `rng`.
pub fn pgd_with_rng<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &Matrix,
    labels: &[usize],
    config: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<Matrix> {
    config.validate()?;
    if x.cols() != model.input_dim() {
        return invalid(format!(
            "batch has {} columns, model expects {}",
            x.cols(),
            model.input_dim()
        ));
    }
    let eps = config.epsilon;
    let lower: Vec<f64> = x.as_slice().iter().map(|&v| (v - eps).max(0.0)).collect();
    let upper: Vec<f64> = x.as_slice().iter().map(|&v| (v + eps).min(1.0)).collect();
    let project = |v: f64, i: usize| v.max(lower[i]).min(upper[i]);

    let mut current = x.clone();
    if config.random_start {
        for (i, v) in current.as_mut_slice().iter_mut().enumerate() {
            *v = project(*v + rng.uniform_in(-eps, eps), i);
        }
    }
    for _ in 0..config.steps {
        let grad = model.input_gradient(&current, labels)?;
        for (i, (v, &g)) in current
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .enumerate()
        {
            *v = project(*v + config.step_size * sign(g), i);
        }
    }
    Ok(current)
}

/// Fraction of `dataset` still classified correctly after [`pgd`].
pub fn robust_accuracy<M: DifferentiableModel + ?Sized>(
    model: &M,
    dataset: &Dataset,
    config: &AttackConfig,
) -> Result<f64> {
    config.validate()?;
    let labels = dataset.require_labels("robust accuracy")?;
    if dataset.is_empty() {
        return invalid("robust accuracy of an empty dataset");
    }
    let chunks: Vec<(usize, usize)> = (0..dataset.len())
        .step_by(EVAL_CHUNK)
        .map(|s| (s, (s + EVAL_CHUNK).min(dataset.len())))
        .collect();
    let correct: Vec<usize> = chunks
        .par_iter()
        .enumerate()
        .map(|(chunk, &(start, end))| -> Result<usize> {
            let x = dataset.features().row_range(start, end);
            let y = &labels[start..end];
            let mut rng = SeededRng::derive(config.seed, chunk as u64);
            let adv = pgd_with_rng(model, &x, y, config, &mut rng)?;
            let probs = model.predict(&adv)?;
            Ok(probs
                .row_iter()
                .zip(y)
                .filter(|(row, &l)| argmax_row(row).ok() == Some(l))
                .count())
        })
        .collect::<Result<_>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / dataset.len() as f64)
}

/// Trains on PGD counterparts of every mini-batch, generated against the
/// current parameters. Batch `t` draws its random start from stream `t` of
/// `attack.seed`.
pub fn adversarial_train<M: DifferentiableModel>(
    model: &mut M,
    dataset: &Dataset,
    attack: &AttackConfig,
    options: &TrainOptions,
    rng: &mut SeededRng,
) -> Result<TrainingLog> {
    attack.validate()?;
    let mut transform = |m: &M, x: &Matrix, y: &[usize], counter: u64| {
        pgd_with_rng(
            m,
            x,
            y,
            attack,
            &mut SeededRng::derive(attack.seed, counter),
        )
    };
    fit(model, dataset, options, rng, Some(&mut transform))
}

/// Clean accuracy, for symmetry with [`robust_accuracy`].
pub fn clean_accuracy<M: BlackBoxModel + ?Sized>(model: &M, dataset: &Dataset) -> Result<f64> {
    crate::models::accuracy(model, dataset)
}
