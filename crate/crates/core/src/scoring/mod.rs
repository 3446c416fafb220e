//! Brittle-score, relative improvement, model ranking and the correlation
//! between brittle-score and robust accuracy.
//!
//! ```text
//! brittle_score(M) = 1/(n·d) · Σ_i ‖LIME(M, x_i)‖₁
//! R.I.(M)          = 100 · (score(standard) − score(M)) / score(standard)
//! ```
//!
//! Scores are only comparable between models evaluated on the same dataset
//! with the same explainer settings.

mod correlation;
mod table;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use correlation::{average_ranks, correlation, pearson, spearman, Correlation};
pub use table::{read_table_csv, write_table_csv, TableRow};

use crate::error::{invalid, Result};
use crate::lime::{explain_with_rng, ExplainTarget, LimeConfig};
use crate::math::{fingerprint, Matrix, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model_id: String,
    pub dataset_id: String,
    pub n: usize,
    pub d: usize,
    pub lime_config: LimeConfig,
    pub brittle_score: f64,
    #[serde(default)]
    pub robust_acc: Option<f64>,
    #[serde(default)]
    pub relative_improvement: Option<f64>,
    /// ‖w_i‖₁ for every scored sample, in input order.
    pub per_sample_l1: Vec<f64>,
    pub timestamp: String,
}

impl ScoreReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Random stream used to explain sample `x`: keyed by the global seed and the
/// sample's content, so a sample is explained identically wherever it sits in
/// the batch.
pub fn sample_stream(seed: u64, x: &[f64]) -> SeededRng {
    SeededRng::derive(seed, fingerprint(x))
}

/// Scores `model` on unlabeled `samples` (rows in `[0, 1]^d`).
pub fn brittle_score<T: ExplainTarget + ?Sized>(
    model: &T,
    samples: &Matrix,
    dataset_id: &str,
    config: &LimeConfig,
) -> Result<ScoreReport> {
    config.validate()?;
    let (n, d) = samples.shape();
    if n == 0 || d == 0 {
        return invalid("brittle-score needs at least one sample of nonzero dimension");
    }
    if d != model.input_dim() {
        return invalid(format!(
            "samples have {d} features, model expects {}",
            model.input_dim()
        ));
    }
    if samples.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return invalid("samples must lie in [0, 1]");
    }
    let norms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = samples.row(i);
            let mut rng = sample_stream(config.seed, x);
            explain_with_rng(model, x, config, &mut rng).map(|e| e.l1_norm())
        })
        .collect::<Result<_>>()?;
    let mean = norms.iter().sum::<f64>() / n as f64;
    Ok(ScoreReport {
        model_id: model.target_id(),
        dataset_id: dataset_id.to_string(),
        n,
        d,
        lime_config: *config,
        brittle_score: mean / d as f64,
        robust_acc: None,
        relative_improvement: None,
        per_sample_l1: norms,
        timestamp: timestamp(),
    })
}

/// RFC 3339 time of report creation; `SOURCE_DATE_EPOCH` pins it for
/// reproducible builds of the outputs.
pub fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok());
    let when = match secs {
        Some(s) => chrono::DateTime::from_timestamp(s, 0).unwrap_or_default(),
        None => chrono::Utc::now(),
    };
    when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Percentage reduction of `score_model` relative to `score_standard`.
pub fn relative_improvement(score_standard: f64, score_model: f64) -> Result<f64> {
    if !(score_standard > 0.0) || !score_standard.is_finite() {
        return invalid(format!("standard score {score_standard} must be > 0"));
    }
    Ok((score_standard - score_model) / score_standard * 100.0)
}

/// Indices of `reports` from most to least robust (ascending brittle-score,
/// stable on ties). All reports must share the dataset and explainer settings.
pub fn rank_models(reports: &[ScoreReport]) -> Result<Vec<usize>> {
    let Some(first) = reports.first() else {
        return Ok(Vec::new());
    };
    let mixed: Vec<String> = reports
        .iter()
        .filter(|r| r.dataset_id != first.dataset_id)
        .map(|r| format!("{} ({})", r.model_id, r.dataset_id))
        .collect();
    if !mixed.is_empty() {
        return invalid(format!(
            "reports scored on datasets other than {}: {}",
            first.dataset_id,
            mixed.join(", ")
        ));
    }
    let mixed: Vec<&str> = reports
        .iter()
        .filter(|r| r.lime_config != first.lime_config)
        .map(|r| r.model_id.as_str())
        .collect();
    if !mixed.is_empty() {
        return invalid(format!(
            "reports scored with different LIME settings: {}",
            mixed.join(", ")
        ));
    }
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        reports[a]
            .brittle_score
            .total_cmp(&reports[b].brittle_score)
    });
    Ok(order)
}
