pub mod attack_eval;
pub mod explain;
pub mod report;
pub mod score;
pub mod serve;
pub mod train;

use std::path::Path;
use std::time::Duration;

use brittle_core::data::{synth_linear_dataset, Dataset, ImageShape};
use brittle_core::models::{load_checkpoint, BlackBoxModel, Network};
use brittle_core::SeededRng;
use brittle_service::RemoteModel;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// The configured dataset. Labels are kept only when `labeled` is set; a
/// labeled request fails without them.
pub fn load_dataset(cfg: &ExperimentConfig, labeled: Option<&str>) -> CliResult<Dataset> {
    let ds = &cfg.dataset;
    let full = if let Some(s) = &ds.synthetic {
        if ds.images.is_some() || ds.labels.is_some() {
            return Err(CliError::Usage(
                "--synthetic-linear cannot be combined with --images or --labels".into(),
            ));
        }
        let mut rng = SeededRng::new(s.seed);
        synth_linear_dataset(&mut rng, s.n, s.d, &s.resolved_weights(), s.bias)?
    } else if let Some(images) = &ds.images {
        let name = images.file_name().map_or_else(
            || images.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        let labels = if labeled.is_some() {
            ds.labels.as_deref()
        } else {
            None
        };
        Dataset::from_idx(name, images, labels)?
    } else {
        return Err(CliError::Usage(
            "no dataset given: pass --images <PATH> or --synthetic-linear <N,D>".into(),
        ));
    };
    let full = match labeled {
        Some(purpose) if full.labels().is_none() => {
            return Err(CliError::Usage(format!(
                "{purpose} needs labels: pass --labels <PATH>"
            )));
        }
        Some(_) => full,
        None => full.without_labels(),
    };
    Ok(match ds.subset {
        Some(n) => full.shuffled_head(n, ds.subset_seed),
        None => full,
    })
}

/// Image grid of a dataset row; flat data is treated as a single-row image.
pub fn shape_of(ds: &Dataset) -> ImageShape {
    ds.image_shape().unwrap_or(ImageShape {
        height: 1,
        width: ds.dim(),
        channels: 1,
    })
}

pub fn load_network(path: &Path) -> CliResult<Network> {
    load_checkpoint(path).map_err(|e| {
        CliError::Core(match e {
            brittle_core::Error::Io(io) => {
                brittle_core::Error::Checkpoint(format!("{}: {io}", path.display()))
            }
            other => other,
        })
    })
}

pub fn require_checkpoint(cfg: &ExperimentConfig, command: &str) -> CliResult<Network> {
    match &cfg.source.checkpoint {
        Some(p) => load_network(p),
        None => Err(CliError::Usage(format!(
            "{command} needs --checkpoint <FILE>"
        ))),
    }
}

/// Checkpoint or remote endpoint, whichever is configured.
pub fn load_black_box(cfg: &ExperimentConfig, command: &str) -> CliResult<Box<dyn BlackBoxModel>> {
    match (&cfg.source.checkpoint, &cfg.source.remote) {
        (Some(p), None) => Ok(Box::new(load_network(p)?)),
        (None, Some(url)) => Ok(Box::new(RemoteModel::connect(
            url,
            Duration::from_secs(cfg.source.timeout_secs),
            cfg.source.max_batch,
        )?)),
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--checkpoint and --remote are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(format!(
            "{command} needs a model: pass --checkpoint <FILE> or --remote <URL>"
        ))),
    }
}

pub fn check_dims(model_dim: usize, ds: &Dataset) -> CliResult<()> {
    if model_dim != ds.dim() {
        return Err(CliError::Data(format!(
            "model expects {model_dim} features but dataset {} has {}",
            ds.name,
            ds.dim()
        )));
    }
    Ok(())
}
