use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use brittle_core::plot::{bar_chart, scatter_plot};
use brittle_core::scoring::{
    correlation, rank_models, read_table_csv, relative_improvement, write_table_csv, Correlation,
    ScoreReport, TableRow,
};
use brittle_core::Error;
use serde::Serialize;

use super::attack_eval::RobustRecord;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Rows that can be compared with each other.
struct Group {
    label: String,
    rows: Vec<TableRow>,
}

#[derive(Serialize)]
struct CorrelationEntry {
    group: String,
    pairs: usize,
    pearson: Option<f64>,
    spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    undefined: Option<String>,
}

fn files_with_suffix(dir: &Path, suffix: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let matches = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(suffix) && n.len() > suffix.len());
        if matches && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn score_groups(dir: &Path) -> CliResult<Vec<Group>> {
    let mut robust: BTreeMap<String, f64> = BTreeMap::new();
    for path in files_with_suffix(dir, ".robust.csv")? {
        for record in csv::Reader::from_path(&path)?.deserialize::<RobustRecord>() {
            let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            robust.insert(record.model_id, record.robust_acc);
        }
    }
    let mut grouped: BTreeMap<(String, String), Vec<ScoreReport>> = BTreeMap::new();
    for path in files_with_suffix(dir, ".score.json")? {
        let report = ScoreReport::load(&path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let key = (
            report.dataset_id.clone(),
            serde_json::to_string(&report.lime_config)?,
        );
        grouped.entry(key).or_default().push(report);
    }
    let mut per_dataset: BTreeMap<String, usize> = BTreeMap::new();
    for (dataset, _) in grouped.keys() {
        *per_dataset.entry(dataset.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut groups = Vec::new();
    for ((dataset, _), reports) in grouped {
        let order = rank_models(&reports)?;
        let rows = order
            .into_iter()
            .map(|j| {
                let r = &reports[j];
                TableRow {
                    model_id: r.model_id.clone(),
                    robust_acc: robust.get(&r.model_id).copied(),
                    brittle_score: r.brittle_score,
                    relative_improvement: None,
                }
            })
            .collect();
        let label = if per_dataset[&dataset] > 1 {
            let i = seen.entry(dataset.clone()).or_default();
            *i += 1;
            format!("{dataset} (explainer settings {i})")
        } else {
            dataset
        };
        groups.push(Group { label, rows });
    }
    Ok(groups)
}

fn recorded_groups(dir: &Path) -> CliResult<Vec<Group>> {
    let mut groups = Vec::new();
    for path in files_with_suffix(dir, ".recorded.csv")? {
        let mut rows = read_table_csv(File::open(&path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        rows.sort_by(|a, b| a.brittle_score.total_cmp(&b.brittle_score));
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let label = name.trim_end_matches(".recorded.csv").to_string();
        groups.push(Group { label, rows });
    }
    Ok(groups)
}

/// The named model, else the least robust one, else the highest score.
fn standard_index(rows: &[TableRow], named: Option<&str>) -> usize {
    if let Some(i) = named.and_then(|n| rows.iter().position(|r| r.model_id == n)) {
        return i;
    }
    let least_robust = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.robust_acc.map(|a| (i, a)))
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(rows[b.0].brittle_score.total_cmp(&rows[a.0].brittle_score))
        });
    match least_robust {
        Some((i, _)) => i,
        None => rows
            .iter()
            .enumerate()
            .max_by(|a, b| {
                a.1.brittle_score
                    .total_cmp(&b.1.brittle_score)
                    .then(b.0.cmp(&a.0))
            })
            .map_or(0, |(i, _)| i),
    }
}

fn fill_relative_improvement(rows: &mut [TableRow], named: Option<&str>) {
    if rows.is_empty() {
        return;
    }
    let reference = rows[standard_index(rows, named)].brittle_score;
    for row in rows.iter_mut() {
        row.relative_improvement = relative_improvement(reference, row.brittle_score).ok();
    }
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    let parts: Vec<&str> = s.split('-').filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        "group".to_string()
    } else {
        parts.join("-")
    }
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

fn text_table(groups: &[Group]) -> String {
    let mut out = String::new();
    for g in groups {
        let _ = writeln!(out, "[{}]", g.label);
        let width = g
            .rows
            .iter()
            .map(|r| r.model_id.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let _ = writeln!(
            out,
            "{:width$}  {:>10}  {:>13}  {:>8}",
            "model", "robust_acc", "brittle_score", "R.I."
        );
        for r in &g.rows {
            let _ = writeln!(
                out,
                "{:width$}  {:>10}  {:>13.6}  {:>8}",
                r.model_id,
                cell(r.robust_acc, 4),
                r.brittle_score,
                cell(r.relative_improvement, 2)
            );
        }
    }
    out
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<()> {
    let dir = &cfg.output_dir;
    if !dir.is_dir() {
        return Err(CliError::Data(format!(
            "run directory {} does not exist",
            dir.display()
        )));
    }
    let mut groups = score_groups(dir)?;
    groups.extend(recorded_groups(dir)?);
    groups.retain(|g| !g.rows.is_empty());
    if groups.is_empty() {
        return Err(CliError::Data(format!(
            "no score reports (*.score.json) or recorded tables (*.recorded.csv) in {}",
            dir.display()
        )));
    }
    cfg.echo("report")?;
    for g in &mut groups {
        fill_relative_improvement(&mut g.rows, cfg.standard_model.as_deref());
    }

    let all: Vec<TableRow> = groups.iter().flat_map(|g| g.rows.iter().cloned()).collect();
    write_table_csv(&all, File::create(dir.join("table.csv"))?)?;
    let text = text_table(&groups);
    fs::write(dir.join("table.txt"), &text)?;
    print!("{text}");

    let several = groups.len() > 1;
    let bars: Vec<(String, f64)> = groups
        .iter()
        .flat_map(|g| {
            g.rows.iter().map(move |r| {
                let label = if several {
                    format!("{}: {}", g.label, r.model_id)
                } else {
                    r.model_id.clone()
                };
                (label, r.brittle_score)
            })
        })
        .collect();
    fs::write(
        dir.join("scores.svg"),
        bar_chart("Brittle-score by model", "brittle-score", &bars)?,
    )?;

    let mut entries = Vec::new();
    let mut used = Vec::new();
    for g in &groups {
        let points: Vec<(String, f64, f64)> = g
            .rows
            .iter()
            .filter_map(|r| {
                r.robust_acc
                    .map(|a| (r.model_id.clone(), a, r.brittle_score))
            })
            .collect();
        if points.len() < 3 {
            continue;
        }
        let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
        let (corr, undefined) = match correlation(&xs, &ys) {
            Ok(c) => (Some(c), None),
            Err(Error::UndefinedCorrelation(m)) => (None, Some(m)),
            Err(e) => return Err(e.into()),
        };
        let mut name = slug(&g.label);
        if used.contains(&name) {
            name = format!("{name}-{}", used.len() + 1);
        }
        used.push(name.clone());
        let svg = scatter_plot(
            &format!("Brittle-score vs robust accuracy: {}", g.label),
            &points,
            corr,
        )?;
        fs::write(dir.join(format!("scatter-{name}.svg")), svg)?;
        if let Some(Correlation { pearson, spearman }) = corr {
            println!(
                "[{}] pearson {pearson:.4}, spearman {spearman:.4} over {} models",
                g.label,
                points.len()
            );
        }
        entries.push(CorrelationEntry {
            group: g.label.clone(),
            pairs: points.len(),
            pearson: corr.map(|c| c.pearson),
            spearman: corr.map(|c| c.spearman),
            undefined,
        });
    }
    if !entries.is_empty() {
        fs::write(
            dir.join("correlation.json"),
            serde_json::to_string_pretty(&entries)? + "\n",
        )?;
    }
    Ok(())
}
