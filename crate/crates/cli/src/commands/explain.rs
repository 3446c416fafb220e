use std::fmt::Write as _;
use std::fs;

use brittle_core::lime::{
    explain_with_rng, render_explanation, sparsity, ExplanationRecord, MaskColor,
};
use brittle_core::scoring::sample_stream;
use serde::Serialize;

use super::{check_dims, load_black_box, load_dataset, shape_of};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct SampleSummary {
    index: usize,
    target_class: usize,
    r_squared: f64,
    l1_norm: f64,
    sparsity: f64,
    pink: usize,
    blue: usize,
    yellow: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    model_id: &'a str,
    dataset_id: &'a str,
    threshold_fraction: f64,
    mean_sparsity: f64,
    samples: Vec<SampleSummary>,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let model = load_black_box(cfg, "explain")?;
    let ds = load_dataset(cfg, None)?;
    check_dims(model.input_dim(), &ds)?;
    if cfg.indices.is_empty() {
        return Err(CliError::Usage(
            "--indices must name at least one sample".into(),
        ));
    }
    if let Some(&bad) = cfg.indices.iter().find(|&&i| i >= ds.len()) {
        return Err(CliError::Data(format!(
            "index {bad} out of range: {} has {} samples",
            ds.name,
            ds.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.threshold_fraction) {
        return Err(CliError::Usage(format!(
            "--threshold {} outside [0, 1)",
            cfg.threshold_fraction
        )));
    }
    let model_id = cfg.model_id.clone().unwrap_or_else(|| model.model_id());
    cfg.echo(&format!("{model_id}.explain"))?;
    let masks = cfg.output_dir.join("masks");
    fs::create_dir_all(&masks)?;
    let shape = shape_of(&ds);

    let mut lines = String::new();
    let mut samples = Vec::with_capacity(cfg.indices.len());
    for &index in &cfg.indices {
        let x = ds.features().row(index);
        let mut e = explain_with_rng(
            model.as_ref(),
            x,
            &cfg.lime,
            &mut sample_stream(cfg.lime.seed, x),
        )?;
        e.query_point_id = Some(format!("{}#{index}", ds.name));
        let mask = render_explanation(&e, shape, cfg.threshold_fraction)?;
        let stem = format!("{model_id}-{index}");
        fs::write(masks.join(format!("{stem}.ppm")), mask.to_ppm())?;
        fs::write(masks.join(format!("{stem}.svg")), mask.to_svg(10))?;
        let _ = writeln!(
            lines,
            "{}",
            ExplanationRecord::new(&e, &cfg.lime).to_json_line()?
        );
        samples.push(SampleSummary {
            index,
            target_class: e.target_class,
            r_squared: e.r_squared,
            l1_norm: e.l1_norm(),
            sparsity: sparsity(&e, cfg.threshold_fraction)?,
            pink: mask.count(MaskColor::Pink),
            blue: mask.count(MaskColor::Blue),
            yellow: mask.count(MaskColor::Yellow),
        });
    }
    fs::write(
        cfg.output_dir
            .join(format!("{model_id}.explanations.jsonl")),
        lines,
    )?;
    let mean_sparsity = samples.iter().map(|s| s.sparsity).sum::<f64>() / samples.len() as f64;
    let summary = Summary {
        model_id: &model_id,
        dataset_id: &ds.name,
        threshold_fraction: cfg.threshold_fraction,
        mean_sparsity,
        samples,
    };
    fs::write(
        cfg.output_dir.join(format!("{model_id}.sparsity.json")),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "{model_id}: explained {} samples, mean sparsity {mean_sparsity:.4}; masks in {}",
        summary.samples.len(),
        masks.display()
    );
    Ok(())
}
