use brittle_core::attacks::adversarial_train;
use brittle_core::models::{
    accuracy, save_checkpoint, train, ArchitectureSpec, Network, TrainingLog,
};
use brittle_core::SeededRng;
use serde::Serialize;

use super::{load_dataset, shape_of};
use crate::config::{ExperimentConfig, TrainMode};
use crate::error::CliResult;

#[derive(Serialize)]
struct TrainRecord<'a> {
    model_id: &'a str,
    dataset_id: &'a str,
    architecture: String,
    mode: TrainMode,
    n: usize,
    /// Clean accuracy of the final parameters on the training set.
    final_accuracy: f64,
    log: &'a TrainingLog,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let ds = load_dataset(cfg, Some("train"))?;
    let spec = ArchitectureSpec::preset(&cfg.architecture, shape_of(&ds), ds.num_classes())?;
    let id = cfg.model_id();
    cfg.echo(&format!("{id}.train"))?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut net = Network::new(id.clone(), spec, &mut rng)?;
    let log = match cfg.mode {
        TrainMode::Standard => train(&mut net, &ds, &cfg.train, &mut rng)?,
        TrainMode::Adversarial => {
            adversarial_train(&mut net, &ds, &cfg.attack, &cfg.train, &mut rng)?
        }
    };
    let acc = accuracy(&net, &ds)?;
    let checkpoint = cfg.output_dir.join(format!("{id}.ckpt"));
    save_checkpoint(&net, &checkpoint)?;
    let record = TrainRecord {
        model_id: &id,
        dataset_id: &ds.name,
        architecture: net.spec().label(),
        mode: cfg.mode,
        n: ds.len(),
        final_accuracy: acc,
        log: &log,
    };
    std::fs::write(
        cfg.output_dir.join(format!("{id}.train-log.json")),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    println!(
        "{id}: clean accuracy {acc:.4} on {} training samples",
        ds.len()
    );
    println!("checkpoint written to {}", checkpoint.display());
    Ok(())
}
