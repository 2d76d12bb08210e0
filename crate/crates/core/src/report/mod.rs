//! Figures and tables from persisted run logs: per-epoch convergence curves,
//! selection dynamics, mean-and-spread seed bands, and a markdown summary.
//! Every renderer is a deterministic function of its inputs.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::aggregate_runs;
use crate::runner::{EpochRecord, SuiteResult, EPOCH_CSV_HEADER};

use svg::{document, method_color, padded_range, Panel, FULL_VIEW, LEFT_VIEW, RIGHT_VIEW};

/// One parsed `<method>_<seed>_epochs.csv`.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub method: String,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
}

/// Load a run log, recovering method and seed from the file name.
pub fn load_epochs_csv(path: &Path) -> Result<RunLog> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::data(format!("unusable log path {}", path.display())))?;
    let (method, seed) = stem
        .strip_suffix("_epochs")
        .and_then(|base| base.rsplit_once('_'))
        .and_then(|(method, seed)| seed.parse().ok().map(|s: u64| (method, s)))
        .ok_or_else(|| {
            Error::data(format!(
                "log name `{stem}` does not match <method>_<seed>_epochs"
            ))
        })?;

    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == EPOCH_CSV_HEADER => (),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing epochs CSV header".to_string(),
            })
        }
    }
    let records: Vec<EpochRecord> = lines
        .enumerate()
        .map(|(i, row)| EpochRecord::from_csv_row(row, i + 2))
        .collect::<Result<_>>()?;
    if records.is_empty() {
        return Err(Error::data(format!("{} holds no epochs", path.display())));
    }
    Ok(RunLog {
        method: method.to_string(),
        seed,
        records,
    })
}

fn epoch_count(logs: &[&RunLog]) -> Result<usize> {
    let first = logs[0];
    for log in &logs[1..] {
        if log.records.len() != first.records.len() {
            return Err(Error::data(format!(
                "mismatched epoch counts: {}_{} has {}, {}_{} has {}",
                first.method,
                first.seed,
                first.records.len(),
                log.method,
                log.seed,
                log.records.len()
            )));
        }
    }
    Ok(first.records.len())
}

fn accuracy_points(log: &RunLog) -> Vec<(f64, f64)> {
    log.records
        .iter()
        .map(|r| (r.epoch as f64, r.test_acc * 100.0))
        .collect()
}

/// Test-accuracy curves for several runs in one figure, one polyline per log,
/// series ordered and colored by method name.
pub fn render_convergence(logs: &[RunLog]) -> Result<String> {
    if logs.is_empty() {
        return Err(Error::data("no run logs to plot"));
    }
    let mut ordered: Vec<&RunLog> = logs.iter().collect();
    ordered.sort_by(|a, b| (&a.method, a.seed).cmp(&(&b.method, b.seed)));
    let epochs = epoch_count(&ordered)?;

    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for log in &ordered {
        for r in &log.records {
            y_min = y_min.min(r.test_acc * 100.0);
            y_max = y_max.max(r.test_acc * 100.0);
        }
    }

    let mut panel = Panel::new(
        0,
        FULL_VIEW,
        padded_range(0.0, (epochs - 1) as f64),
        padded_range(y_min, y_max),
        "",
        "epoch",
        "test accuracy (%)",
    );
    let mut seen: Vec<&str> = Vec::new();
    for log in &ordered {
        let color = method_color(&log.method);
        panel.polyline(&accuracy_points(log), color, false);
        if !seen.contains(&log.method.as_str()) {
            seen.push(&log.method);
            panel.legend_entry(&log.method, color, false);
        }
    }
    Ok(document(&[panel]))
}

/// Keep/drop ratio curves, plus noise-detection curves when the log carries
/// them. The second element reports whether that right panel was rendered;
/// logs without ground truth only get the left panel.
pub fn render_dynamics(log: &RunLog) -> Result<(String, bool)> {
    let epochs = epoch_count(&[log])?;
    let x_range = padded_range(0.0, (epochs - 1) as f64);
    let has_noise = log
        .records
        .iter()
        .all(|r| r.precision.is_some() && r.recall.is_some() && r.f1.is_some());

    let left_view = if has_noise { LEFT_VIEW } else { FULL_VIEW };
    let mut left = Panel::new(
        0,
        left_view,
        x_range,
        (0.0, 1.05),
        "sample selection",
        "epoch",
        "fraction of training set",
    );
    let keep: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| (r.epoch as f64, r.keep_ratio))
        .collect();
    let drop: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| (r.epoch as f64, r.drop_ratio))
        .collect();
    left.polyline(&keep, "#2ca02c", false);
    left.polyline(&drop, "#d62728", true);
    left.legend_entry("keep ratio", "#2ca02c", false);
    left.legend_entry("drop ratio", "#d62728", true);

    if !has_noise {
        return Ok((document(&[left]), false));
    }

    let mut right = Panel::new(
        1,
        RIGHT_VIEW,
        x_range,
        (0.0, 1.05),
        "noise detection",
        "epoch",
        "score",
    );
    for (pick, label, color) in [
        (
            (|r: &EpochRecord| r.precision) as fn(&EpochRecord) -> Option<f64>,
            "precision",
            "#1f77b4",
        ),
        (|r: &EpochRecord| r.recall, "recall", "#ff7f0e"),
        (|r: &EpochRecord| r.f1, "F1", "#9467bd"),
    ] {
        let pts: Vec<(f64, f64)> = log
            .records
            .iter()
            .map(|r| (r.epoch as f64, pick(r).expect("checked above")))
            .collect();
        right.polyline(&pts, color, false);
        right.legend_entry(label, color, false);
    }
    Ok((document(&[left, right]), true))
}

/// Per-epoch mean and sample standard deviation of test accuracy (in percent)
/// across one method's seed runs.
pub(crate) fn seed_band_stats(logs: &[&RunLog]) -> Result<(Vec<f64>, Vec<f64>)> {
    let epochs = epoch_count(logs)?;
    let mut means = Vec::with_capacity(epochs);
    let mut stds = Vec::with_capacity(epochs);
    for t in 0..epochs {
        let accs: Vec<f64> = logs.iter().map(|l| l.records[t].test_acc * 100.0).collect();
        let (mean, std) = aggregate_runs(&accs)?;
        means.push(mean);
        stds.push(std);
    }
    Ok((means, stds))
}

/// Mean accuracy curve with a +/- one standard deviation band per method.
/// Each group holds one method's logs across seeds; two seeds minimum.
pub fn render_seed_band(groups: &[Vec<RunLog>]) -> Result<String> {
    if groups.is_empty() {
        return Err(Error::data("no run logs to plot"));
    }
    let mut prepared: Vec<(&str, Vec<&RunLog>)> = Vec::new();
    for group in groups {
        let Some(first) = group.first() else {
            return Err(Error::data("empty method group"));
        };
        if group.iter().any(|l| l.method != first.method) {
            return Err(Error::data("a band group must hold a single method"));
        }
        if group.len() < 2 {
            return Err(Error::data(format!(
                "method {} has a single seed; a band needs at least two \
                 (render_convergence handles single runs)",
                first.method
            )));
        }
        prepared.push((&first.method, group.iter().collect()));
    }
    prepared.sort_by_key(|(method, _)| *method);
    let all: Vec<&RunLog> = prepared
        .iter()
        .flat_map(|(_, g)| g.iter().copied())
        .collect();
    let epochs = epoch_count(&all)?;

    let mut series = Vec::new();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (method, group) in &prepared {
        let (means, stds) = seed_band_stats(group)?;
        for (m, s) in means.iter().zip(&stds) {
            y_min = y_min.min(m - s);
            y_max = y_max.max(m + s);
        }
        series.push((*method, means, stds));
    }

    let xs: Vec<f64> = (0..epochs).map(|t| t as f64).collect();
    let mut panel = Panel::new(
        0,
        FULL_VIEW,
        padded_range(0.0, (epochs - 1) as f64),
        padded_range(y_min, y_max),
        "",
        "epoch",
        "test accuracy (%)",
    );
    for (method, means, stds) in &series {
        let color = method_color(method);
        let low: Vec<f64> = means.iter().zip(stds).map(|(m, s)| m - s).collect();
        let high: Vec<f64> = means.iter().zip(stds).map(|(m, s)| m + s).collect();
        panel.band(&xs, &low, &high, color);
        let mean_pts: Vec<(f64, f64)> = xs.iter().copied().zip(means.iter().copied()).collect();
        panel.polyline(&mean_pts, color, false);
        panel.legend_entry(method, color, false);
    }
    Ok(document(&[panel]))
}

/// Round half away from zero to one decimal, the table presentation rule.
fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Format a fraction as a percentage with one decimal.
fn pct(fraction: f64) -> String {
    format!("{:.1}", round1(fraction * 100.0))
}

fn pct_or_na(fraction: Option<f64>) -> String {
    fraction.map(pct).unwrap_or_else(|| "N/A".to_string())
}

/// Accuracy and cost tables in markdown, one row per method in suite order.
/// Percentages round half away from zero to one decimal; seconds keep four
/// decimals because desk-scale epochs are far below a second.
pub fn render_tables(suite: &SuiteResult) -> Result<String> {
    if suite.methods.is_empty() {
        return Err(Error::data("suite holds no completed methods"));
    }
    let mut out = String::new();
    out.push_str("# Suite summary\n\n## Test accuracy (%)\n\n");
    out.push_str("| method | final | best |\n|---|---|---|\n");
    for m in &suite.methods {
        let _ = writeln!(
            out,
            "| {} | {} ± {} | {} ± {} |",
            m.method,
            pct(m.acc_mean),
            pct(m.acc_std),
            pct(m.best_mean),
            pct(m.best_std),
        );
    }

    out.push_str("\n## Noise detection and training cost\n\n");
    out.push_str("| method | noise F1 (%) | AUROC (%) | s/epoch | overhead (%) |\n");
    out.push_str("|---|---|---|---|---|\n");
    for m in &suite.methods {
        let overhead = m
            .overhead_pct
            .map(|v| format!("{:.1}", round1(v)))
            .unwrap_or_else(|| "N/A".to_string());
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.4} | {} |",
            m.method,
            pct_or_na(m.f1_mean),
            pct_or_na(m.auroc_mean),
            m.mean_epoch_seconds,
            overhead,
        );
    }

    if !suite.failures.is_empty() {
        out.push_str("\n## Failed cells\n\n");
        for f in &suite.failures {
            let _ = writeln!(out, "- {} seed {}: {}", f.method, f.seed, f.error);
        }
    }
    Ok(out)
}
