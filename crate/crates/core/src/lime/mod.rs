//! Local linear surrogate explanations (LIME) for black-box models.
//!
//! For a query point `x` the explainer draws `k` Gaussian perturbations of
//! `x`, asks the model for the probability of the class it predicts at `x`,
//! and fits a weighted ridge regression of those probabilities on the
//! perturbed inputs. The regression coefficients are the explanation.

mod render;

use serde::{Deserialize, Serialize};

pub use render::{mask_colors, render_explanation, MaskColor, RenderedMask};

use crate::error::{invalid, Result};
use crate::math::{argmax_row, dot, solve_ridge, Matrix, SeededRng};
use crate::models::BlackBoxModel;

/// Sample weighting applied to neighborhood points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    /// Every sample has weight 1.
    Uniform,
    /// `exp(−‖z − x‖² / width²)`.
    Exponential { width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    /// Neighborhood size.
    pub k: usize,
    /// Per-pixel Gaussian noise, in input units.
    pub noise_stddev: f64,
    pub kernel: Kernel,
    pub lambda: f64,
    pub clip_to_domain: bool,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            k: 1000,
            noise_stddev: 0.3,
            kernel: Kernel::Uniform,
            lambda: 0.0,
            clip_to_domain: true,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return invalid(format!("LIME needs k >= 2 samples, got {}", self.k));
        }
        if !(self.noise_stddev > 0.0) || !self.noise_stddev.is_finite() {
            return invalid(format!("noise stddev {} must be > 0", self.noise_stddev));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda {} must be >= 0", self.lambda));
        }
        if let Kernel::Exponential { width } = self.kernel {
            if !(width > 0.0) || !width.is_finite() {
                return invalid(format!("kernel width {width} must be > 0"));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The scalar a surrogate is fitted to.
///
/// Every [`BlackBoxModel`] is explained through the predicted probability of
/// the class it assigns to the query point. Other implementations (such as
/// [`RawLinearResponse`]) expose a scalar directly.
pub trait ExplainTarget: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Class (or output index) to explain at `x`.
    fn choose_target(&self, x: &[f64]) -> Result<usize>;

    /// Regressed value for `target` at every row of `batch`.
    fn response(&self, batch: &Matrix, target: usize) -> Result<Vec<f64>>;

    fn target_id(&self) -> String;
}

impl<M: BlackBoxModel + ?Sized> ExplainTarget for M {
    fn input_dim(&self) -> usize {
        BlackBoxModel::input_dim(self)
    }

    fn choose_target(&self, x: &[f64]) -> Result<usize> {
        let probs = self.predict(&Matrix::row_vector(x)?)?;
        argmax_row(probs.row(0))
    }

    fn response(&self, batch: &Matrix, target: usize) -> Result<Vec<f64>> {
        let probs = self.predict(batch)?;
        if probs.rows() != batch.rows() || target >= probs.cols() {
            return invalid("model output does not cover the requested class");
        }
        Ok(probs.column(target))
    }

    fn target_id(&self) -> String {
        self.model_id()
    }
}

/// `g(z) = w·z + b`, regressed directly: the exact-recovery oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct RawLinearResponse {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ExplainTarget for RawLinearResponse {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn choose_target(&self, _x: &[f64]) -> Result<usize> {
        Ok(0)
    }

    fn response(&self, batch: &Matrix, _target: usize) -> Result<Vec<f64>> {
        if batch.cols() != self.weights.len() {
            return invalid("batch width differs from the linear response");
        }
        Ok(batch
            .row_iter()
            .map(|z| dot(&self.weights, z) + self.bias)
            .collect())
    }

    fn target_id(&self) -> String {
        "raw-linear".to_string()
    }
}

/// Coefficients of the local surrogate at one query point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub target_class: usize,
    /// Weighted coefficient of determination; 0 when the targets are constant.
    pub r_squared: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_point_id: Option<String>,
}

impl Explanation {
    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// `k` rows of `x + σ·N(0, I)`, clipped to `[0, 1]` when configured.
pub fn sample_neighborhood(x: &[f64], config: &LimeConfig, rng: &mut SeededRng) -> Result<Matrix> {
    config.validate()?;
    let d = x.len();
    let mut values = Vec::with_capacity(config.k * d);
    for _ in 0..config.k {
        for &xv in x {
            let z = xv + config.noise_stddev * rng.standard_normal();
            values.push(if config.clip_to_domain {
                z.clamp(0.0, 1.0)
            } else {
                z
            });
        }
    }
    Matrix::from_vec(config.k, d, values)
}

/// Explains `model` at `x` with the random stream seeded by `config.seed`.
pub fn explain<T: ExplainTarget + ?Sized>(
    model: &T,
    x: &[f64],
    config: &LimeConfig,
) -> Result<Explanation> {
    explain_with_rng(model, x, config, &mut SeededRng::new(config.seed))
}

pub fn explain_with_rng<T: ExplainTarget + ?Sized>(
    model: &T,
    x: &[f64],
    config: &LimeConfig,
    rng: &mut SeededRng,
) -> Result<Explanation> {
    config.validate()?;
    if x.len() != model.input_dim() {
        return invalid(format!(
            "query point has {} features, model expects {}",
            x.len(),
            model.input_dim()
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("query point has non-finite features");
    }
    let target_class = model.choose_target(x)?;
    let neighborhood = sample_neighborhood(x, config, rng)?;
    let targets = model.response(&neighborhood, target_class)?;
    if targets.len() != neighborhood.rows() {
        return invalid("model returned the wrong number of responses");
    }
    let sample_weights: Vec<f64> = match config.kernel {
        Kernel::Uniform => vec![1.0; config.k],
        Kernel::Exponential { width } => neighborhood
            .row_iter()
            .map(|z| {
                let dist2: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (-dist2 / (width * width)).exp()
            })
            .collect(),
    };
    let fit = solve_ridge(&neighborhood, &targets, &sample_weights, config.lambda)?;
    let r_squared = weighted_r_squared(&neighborhood, &targets, &sample_weights, |z| {
        fit.predict_row(z)
    });
    Ok(Explanation {
        weights: fit.weights,
        intercept: fit.intercept,
        target_class,
        r_squared,
        query_point_id: None,
    })
}

fn weighted_r_squared(
    design: &Matrix,
    targets: &[f64],
    weights: &[f64],
    predict: impl Fn(&[f64]) -> f64,
) -> f64 {
    let (lo, hi) = targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
            (a.min(t), b.max(t))
        });
    if lo == hi {
        return 0.0;
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean = targets.iter().zip(weights).map(|(t, s)| t * s).sum::<f64>() / total;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((z, &t), &s) in design.row_iter().zip(targets).zip(weights) {
        let r = t - predict(z);
        ss_res += s * r * r;
        ss_tot += s * (t - mean) * (t - mean);
    }
    if ss_tot <= 0.0 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Fraction of weights with `|w_i| ≤ threshold_fraction · max|w|`.
/// An all-zero explanation is fully sparse (1.0).
pub fn sparsity(explanation: &Explanation, threshold_fraction: f64) -> Result<f64> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return invalid(format!(
            "threshold fraction {threshold_fraction} outside (0, 1)"
        ));
    }
    let w = &explanation.weights;
    if w.is_empty() {
        return Ok(1.0);
    }
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(1.0);
    }
    let cut = threshold_fraction * max;
    Ok(w.iter().filter(|v| v.abs() <= cut).count() as f64 / w.len() as f64)
}

/// One line of the explanation export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub query_point_id: Option<String>,
    pub target_class: usize,
    pub intercept: f64,
    pub r_squared: f64,
    pub weights: Vec<f64>,
    pub config: LimeConfig,
}

impl ExplanationRecord {
    pub fn new(explanation: &Explanation, config: &LimeConfig) -> Self {
        Self {
            query_point_id: explanation.query_point_id.clone(),
            target_class: explanation.target_class,
            intercept: explanation.intercept,
            r_squared: explanation.r_squared,
            weights: explanation.weights.clone(),
            config: *config,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
