use std::fs::File;

use brittle_core::attacks::{clean_accuracy, robust_accuracy, Norm};
use serde::{Deserialize, Serialize};

use super::{check_dims, load_dataset, require_checkpoint};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// The single row of `<model_id>.robust.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub norm: Norm,
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
    pub seed: u64,
    pub n: usize,
    pub clean_acc: f64,
    pub robust_acc: f64,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut net = require_checkpoint(cfg, "attack-eval")?;
    let ds = load_dataset(cfg, Some("attack-eval"))?;
    check_dims(net.spec().input_dim(), &ds)?;
    if let Some(id) = &cfg.model_id {
        net.set_id(id.clone());
    }
    cfg.echo(&format!("{}.attack-eval", net.id()))?;
    let clean = clean_accuracy(&net, &ds)?;
    let robust = robust_accuracy(&net, &ds, &cfg.attack)?;
    let a = &cfg.attack;
    let record = RobustRecord {
        model_id: net.id().to_string(),
        dataset_id: ds.name.clone(),
        norm: a.norm,
        epsilon: a.epsilon,
        steps: a.steps,
        step_size: a.step_size,
        random_start: a.random_start,
        seed: a.seed,
        n: ds.len(),
        clean_acc: clean,
        robust_acc: robust,
    };
    let path = cfg
        .output_dir
        .join(format!("{}.robust.csv", record.model_id));
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.serialize(&record)?;
    w.flush()?;
    println!(
        "{}: clean accuracy {clean:.4}, robust accuracy {robust:.4} at epsilon {:.6} ({} samples)",
        record.model_id,
        a.epsilon,
        ds.len()
    );
    Ok(())
}
