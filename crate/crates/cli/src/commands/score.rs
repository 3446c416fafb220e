use std::fs::OpenOptions;

use brittle_core::scoring::brittle_score;
use serde::Serialize;

use super::{check_dims, load_black_box, load_dataset};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// One row of the run's `scores.csv`.
#[derive(Serialize)]
struct ScoreRow<'a> {
    model_id: &'a str,
    dataset_id: &'a str,
    n: usize,
    d: usize,
    k: usize,
    noise_stddev: f64,
    lime_seed: u64,
    brittle_score: f64,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    if cfg.n == 0 {
        return Err(CliError::Usage("-n must be at least 1".into()));
    }
    let model = load_black_box(cfg, "score")?;
    let ds = load_dataset(cfg, None)?;
    check_dims(model.input_dim(), &ds)?;
    let samples = if ds.len() > cfg.n {
        ds.shuffled_head(cfg.n, cfg.dataset.subset_seed)
    } else {
        ds
    };
    let model_id = cfg.model_id.clone().unwrap_or_else(|| model.model_id());
    cfg.echo(&format!("{model_id}.score"))?;
    let mut report = brittle_score(model.as_ref(), samples.features(), &samples.name, &cfg.lime)?;
    report.model_id = model_id;
    let path = cfg
        .output_dir
        .join(format!("{}.score.json", report.model_id));
    report.save(&path)?;

    let table = cfg.output_dir.join("scores.csv");
    let fresh = !table.exists();
    let file = OpenOptions::new().create(true).append(true).open(&table)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    w.serialize(ScoreRow {
        model_id: &report.model_id,
        dataset_id: &report.dataset_id,
        n: report.n,
        d: report.d,
        k: report.lime_config.k,
        noise_stddev: report.lime_config.noise_stddev,
        lime_seed: report.lime_config.seed,
        brittle_score: report.brittle_score,
    })?;
    w.flush()?;
    println!(
        "{}: brittle-score {:.6} on {} samples of {}",
        report.model_id, report.brittle_score, report.n, report.dataset_id
    );
    Ok(())
}
