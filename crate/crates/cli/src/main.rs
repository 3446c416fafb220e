//! `brittle`: train models, attack them, score them without labels, explain
//! them, serve them over HTTP and collect the results into tables and figures.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{
    AttackArgs, CommonArgs, DataArgs, LabelArgs, LimeArgs, Overrides, SourceArgs, TrainArgs,
};
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "brittle", version, about = "Label-free robustness scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a classifier (standard or PGD adversarial training).
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Robust accuracy of a checkpoint under PGD.
    AttackEval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Brittle-score of a checkpoint or remote model on unlabeled samples.
    Score {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Number of samples scored.
        #[arg(short, long)]
        n: Option<usize>,
        #[command(flatten)]
        lime: LimeArgs,
    },
    /// Explanation masks and sparsity for selected samples.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated sample indices.
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
        /// Weights within this fraction of the largest magnitude render yellow.
        #[arg(long, value_parser = config::parse_real)]
        threshold: Option<f64>,
        #[command(flatten)]
        lime: LimeArgs,
    },
    /// Serve a checkpoint over HTTP until interrupted.
    Serve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Listen address, e.g. 127.0.0.1:8080 (port 0 picks a free port).
        #[arg(long)]
        bind: Option<String>,
    },
    /// Comparison table, bar chart and correlation scatter for a run directory.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Model whose score is the reference for relative improvement.
        #[arg(long)]
        standard_model: Option<String>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let none = Overrides {
        common: &CommonArgs::default(),
        data: None,
        labels: None,
        train: None,
        attack: None,
        lime: None,
        source: None,
    };
    match cli.command {
        Command::Train {
            common,
            data,
            labels,
            train,
            attack,
        } => {
            let cfg = Overrides {
                common: &common,
                data: Some(&data),
                labels: Some(&labels),
                train: Some(&train),
                attack: Some(&attack),
                ..none
            }
            .resolve()?;
            commands::train::run(&cfg)
        }
        Command::AttackEval {
            common,
            checkpoint,
            data,
            labels,
            attack,
        } => {
            let source = SourceArgs {
                checkpoint,
                ..SourceArgs::default()
            };
            let cfg = Overrides {
                common: &common,
                data: Some(&data),
                labels: Some(&labels),
                attack: Some(&attack),
                source: Some(&source),
                ..none
            }
            .resolve()?;
            commands::attack_eval::run(&cfg)
        }
        Command::Score {
            common,
            source,
            data,
            n,
            lime,
        } => {
            let mut cfg = Overrides {
                common: &common,
                data: Some(&data),
                lime: Some(&lime),
                source: Some(&source),
                ..none
            }
            .resolve()?;
            if let Some(n) = n {
                cfg.n = n;
            }
            commands::score::run(&cfg)
        }
        Command::Explain {
            common,
            source,
            data,
            indices,
            threshold,
            lime,
        } => {
            let mut cfg = Overrides {
                common: &common,
                data: Some(&data),
                lime: Some(&lime),
                source: Some(&source),
                ..none
            }
            .resolve()?;
            if let Some(i) = indices {
                cfg.indices = i;
            }
            if let Some(t) = threshold {
                cfg.threshold_fraction = t;
            }
            commands::explain::run(&cfg)
        }
        Command::Serve {
            common,
            checkpoint,
            bind,
        } => {
            let source = SourceArgs {
                checkpoint,
                ..SourceArgs::default()
            };
            let mut cfg = Overrides {
                common: &common,
                source: Some(&source),
                ..none
            }
            .resolve()?;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            commands::serve::run(&cfg)
        }
        Command::Report {
            common,
            standard_model,
        } => {
            let mut cfg = Overrides {
                common: &common,
                ..none
            }
            .resolve()?;
            if standard_model.is_some() {
                cfg.standard_model = standard_model;
            }
            commands::report::run(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
