//! The experiment configuration document and the flags that override it.

use std::path::{Path, PathBuf};

use brittle_core::attacks::{AttackConfig, Norm};
use brittle_core::lime::{Kernel, LimeConfig};
use brittle_core::models::TrainOptions;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Standard,
    Adversarial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    /// Hyperplane normal; alternating `+1, −1, …` when empty.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn resolved_weights(&self) -> Vec<f64> {
        if self.weights.is_empty() {
            (0..self.d)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect()
        } else {
            self.weights.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    /// Keep only the first `subset` rows of a shuffle seeded by `subset_seed`.
    pub subset: Option<usize>,
    pub subset_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub checkpoint: Option<PathBuf>,
    pub remote: Option<String>,
    pub max_batch: usize,
    pub timeout_secs: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            remote: None,
            max_batch: brittle_service::DEFAULT_MAX_BATCH,
            timeout_secs: brittle_service::DEFAULT_TIMEOUT.as_secs(),
        }
    }
}

/// Everything a command needs. Each command echoes the resolved document to
/// `<output_dir>/<model_id>.<command>.config.json` (`report.config.json` for
/// reports); passing that file back through `--config` reruns the command
/// identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Architecture preset: linear, mlp, cnn3 or cnn5.
    pub architecture: String,
    pub mode: TrainMode,
    pub train: TrainOptions,
    pub attack: AttackConfig,
    pub lime: LimeConfig,
    /// Number of samples scored.
    pub n: usize,
    pub output_dir: PathBuf,
    /// Seeds parameter initialization and batch order.
    pub seed: u64,
    pub model_id: Option<String>,
    pub source: SourceConfig,
    /// Dataset rows explained by `explain`.
    pub indices: Vec<usize>,
    pub threshold_fraction: f64,
    pub bind: String,
    /// Reference model for relative improvement in `report`.
    pub standard_model: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            architecture: "mlp".to_string(),
            mode: TrainMode::Standard,
            train: TrainOptions::default(),
            attack: AttackConfig::linf(8.0 / 255.0),
            lime: LimeConfig::default(),
            n: 1000,
            output_dir: PathBuf::from("runs/default"),
            seed: 0,
            model_id: None,
            source: SourceConfig::default(),
            indices: vec![0],
            threshold_fraction: 0.1,
            bind: "127.0.0.1:8080".to_string(),
            standard_model: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
    }

    /// Writes the echo to `<output_dir>/<name>.config.json` and returns its path.
    pub fn echo(&self, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join(format!("{name}.config.json"));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn model_id(&self) -> String {
        self.model_id.clone().unwrap_or_else(|| {
            let mode = match self.mode {
                TrainMode::Standard => "standard",
                TrainMode::Adversarial => "adversarial",
            };
            format!("{}-{mode}", self.architecture)
        })
    }
}

/// Parses `0.5`, `8/255` or `1e-3`.
pub fn parse_real(text: &str) -> Result<f64, String> {
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {text:?}"))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {text:?}"))?;
            a / b
        }
        None => text
            .trim()
            .parse()
            .map_err(|_| format!("not a number: {text:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("not a finite number: {text:?}"))
    }
}

/// `N,D`: size and dimension of a synthetic linearly separable set.
fn parse_shape(text: &str) -> Result<(usize, usize), String> {
    let (n, d) = text.split_once(',').ok_or("expected N,D")?;
    Ok((
        n.trim().parse().map_err(|_| "bad N")?,
        d.trim().parse().map_err(|_| "bad D")?,
    ))
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Configuration document; flags given alongside it take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run directory for every output of the command.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Name under which outputs are written.
    #[arg(long)]
    pub model_id: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct DataArgs {
    /// IDX image file (optionally gzipped).
    #[arg(long, value_name = "PATH")]
    pub images: Option<PathBuf>,
    /// Synthetic linearly separable set of N samples in D dimensions, used
    /// instead of --images.
    #[arg(long, value_name = "N,D", value_parser = parse_shape)]
    pub synthetic_linear: Option<(usize, usize)>,
    /// Seed of the synthetic set.
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    /// Keep only this many rows of a seeded shuffle.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Seed of the subset shuffle.
    #[arg(long)]
    pub subset_seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct LabelArgs {
    /// IDX label file matching --images.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct TrainArgs {
    /// linear, mlp, cnn3 or cnn5.
    #[arg(long)]
    pub arch: Option<String>,
    /// Standard or PGD adversarial training.
    #[arg(long, value_enum)]
    pub mode: Option<TrainMode>,
    /// Passes over the training set.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, value_parser = parse_real)]
    pub lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seeds initialization and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct AttackArgs {
    /// l∞ radius in pixel units, e.g. 8/255. Unless --step-size is given the
    /// step becomes 2.5·ε/steps.
    #[arg(long, value_parser = parse_real)]
    pub epsilon: Option<f64>,
    /// PGD iterations.
    #[arg(long)]
    pub steps: Option<usize>,
    /// PGD step size.
    #[arg(long, value_parser = parse_real)]
    pub step_size: Option<f64>,
    /// Start PGD at the clean input.
    #[arg(long)]
    pub no_random_start: bool,
    /// Seed of the PGD random starts.
    #[arg(long)]
    pub attack_seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct LimeArgs {
    /// Neighborhood size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Gaussian noise stddev in pixel units.
    #[arg(long, value_parser = parse_real)]
    pub noise: Option<f64>,
    /// Use the exponential kernel with this width (uniform otherwise).
    #[arg(long, value_parser = parse_real)]
    pub kernel_width: Option<f64>,
    /// Ridge penalty of the surrogate fit.
    #[arg(long, value_parser = parse_real)]
    pub lambda: Option<f64>,
    /// Do not clip neighborhood samples to [0, 1].
    #[arg(long)]
    pub no_clip: bool,
    /// Seed of the neighborhood sampler.
    #[arg(long)]
    pub lime_seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SourceArgs {
    /// Model checkpoint.
    #[arg(long, value_name = "FILE", conflicts_with = "remote")]
    pub checkpoint: Option<PathBuf>,
    /// Base URL of a prediction endpoint, e.g. http://127.0.0.1:8080.
    #[arg(long, value_name = "URL")]
    pub remote: Option<String>,
    /// Rows per prediction request.
    #[arg(long)]
    pub max_batch: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

/// Starts from `--config` (or the defaults) and applies every flag given.
pub struct Overrides<'a> {
    pub common: &'a CommonArgs,
    pub data: Option<&'a DataArgs>,
    pub labels: Option<&'a LabelArgs>,
    pub train: Option<&'a TrainArgs>,
    pub attack: Option<&'a AttackArgs>,
    pub lime: Option<&'a LimeArgs>,
    pub source: Option<&'a SourceArgs>,
}

impl Overrides<'_> {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.common.out {
            cfg.output_dir = out.clone();
        }
        if let Some(id) = &self.common.model_id {
            cfg.model_id = Some(id.clone());
        }
        if let Some(d) = self.data {
            apply_data(&mut cfg.dataset, d);
        }
        match self.labels {
            Some(l) => {
                if let Some(p) = &l.labels {
                    cfg.dataset.labels = Some(p.clone());
                }
            }
            // Commands without a label flag never read labels, even when a
            // config document names a label file.
            None => cfg.dataset.labels = None,
        }
        if let Some(t) = self.train {
            apply_train(&mut cfg, t);
        }
        if let Some(a) = self.attack {
            apply_attack(&mut cfg.attack, a);
        }
        if let Some(l) = self.lime {
            apply_lime(&mut cfg.lime, l);
        }
        if let Some(s) = self.source {
            if let Some(c) = &s.checkpoint {
                cfg.source.checkpoint = Some(c.clone());
                cfg.source.remote = None;
            }
            if let Some(r) = &s.remote {
                cfg.source.remote = Some(r.clone());
                cfg.source.checkpoint = None;
            }
            if let Some(m) = s.max_batch {
                cfg.source.max_batch = m;
            }
            if let Some(t) = s.timeout_secs {
                cfg.source.timeout_secs = t;
            }
        }
        Ok(cfg)
    }
}

fn apply_data(ds: &mut DatasetConfig, d: &DataArgs) {
    if let Some(p) = &d.images {
        ds.images = Some(p.clone());
        ds.synthetic = None;
    }
    if let Some((n, dim)) = d.synthetic_linear {
        let previous = ds.synthetic.take();
        ds.synthetic = Some(SyntheticConfig {
            n,
            d: dim,
            weights: Vec::new(),
            bias: 0.0,
            seed: previous.map_or(0, |p| p.seed),
        });
        ds.images = None;
        ds.labels = None;
    }
    if let (Some(seed), Some(s)) = (d.synthetic_seed, ds.synthetic.as_mut()) {
        s.seed = seed;
    }
    if let Some(n) = d.subset {
        ds.subset = Some(n);
    }
    if let Some(s) = d.subset_seed {
        ds.subset_seed = s;
    }
}

fn apply_train(cfg: &mut ExperimentConfig, t: &TrainArgs) {
    if let Some(a) = &t.arch {
        cfg.architecture = a.clone();
    }
    if let Some(m) = t.mode {
        cfg.mode = m;
    }
    if let Some(e) = t.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = t.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = t.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(s) = t.seed {
        cfg.seed = s;
    }
}

fn apply_attack(attack: &mut AttackConfig, a: &AttackArgs) {
    attack.norm = Norm::Linf;
    if let Some(s) = a.steps {
        attack.steps = s;
    }
    if let Some(e) = a.epsilon {
        attack.epsilon = e;
    }
    if a.epsilon.is_some() || a.steps.is_some() {
        attack.step_size = 2.5 * attack.epsilon / attack.steps.max(1) as f64;
    }
    if let Some(s) = a.step_size {
        attack.step_size = s;
    }
    if a.no_random_start {
        attack.random_start = false;
    }
    if let Some(s) = a.attack_seed {
        attack.seed = s;
    }
}

fn apply_lime(lime: &mut LimeConfig, l: &LimeArgs) {
    if let Some(k) = l.k {
        lime.k = k;
    }
    if let Some(n) = l.noise {
        lime.noise_stddev = n;
    }
    if let Some(w) = l.kernel_width {
        lime.kernel = Kernel::Exponential { width: w };
    }
    if let Some(lambda) = l.lambda {
        lime.lambda = lambda;
    }
    if l.no_clip {
        lime.clip_to_domain = false;
    }
    if let Some(s) = l.lime_seed {
        lime.seed = s;
    }
}
