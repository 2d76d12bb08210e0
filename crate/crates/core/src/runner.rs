//! Experiment orchestration: build the dataset, resolve the drop schedule,
//! run the per-epoch training loop for each (method, seed) cell, and persist
//! per-epoch CSV logs plus a JSON suite summary.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, NoiseKindConfig, RhoMax, RunConfig, TimingMode};
use crate::data::{
    empirical_noise_rate, inject_noise, load_csv, make_blobs, nearest_centroid_confusion,
    LabeledDataset, NoiseKind, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_runs, auroc, noise_prf, overhead_pct, test_accuracy, NoiseReport, TimingRecord,
};
use crate::model::{cosine_lr, ModelState};
use crate::rng::stream_seed;
use crate::selection::{Method, ScheduleConfig, SelectionState};

/// One row of a run log: the state of a single training epoch.
///
/// The four noise columns are `None` when the method reports no noise metrics
/// or the dataset has no ground truth; `auroc` additionally requires a probe
/// pass this epoch, so it stays fresh.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub keep_ratio: f64,
    pub drop_ratio: f64,
    pub kept_count: usize,
    pub mean_kept_loss: f64,
    pub test_acc: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auroc: Option<f64>,
    pub epoch_seconds: f64,
}

/// Column order of the epochs CSV, matching [`EpochRecord`] field order.
pub const EPOCH_CSV_HEADER: &str = "epoch,lr,keep_ratio,drop_ratio,kept_count,\
mean_kept_loss,test_acc,precision,recall,f1,auroc,epoch_seconds";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn field_f64(s: &str, name: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} value `{s}`"),
    })
}

fn field_usize(s: &str, name: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} value `{s}`"),
    })
}

fn field_opt(s: &str, name: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        field_f64(s, name, line).map(Some)
    }
}

impl EpochRecord {
    /// Serialize as one CSV row. Floats use the shortest round-trip form;
    /// absent metrics become empty fields.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.lr,
            self.keep_ratio,
            self.drop_ratio,
            self.kept_count,
            self.mean_kept_loss,
            self.test_acc,
            fmt_opt(self.precision),
            fmt_opt(self.recall),
            fmt_opt(self.f1),
            fmt_opt(self.auroc),
            self.epoch_seconds,
        )
    }

    /// Parse one CSV row; `line` is the 1-based line number for error reports.
    pub fn from_csv_row(row: &str, line: usize) -> Result<EpochRecord> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 12 fields, found {}", fields.len()),
            });
        }
        Ok(EpochRecord {
            epoch: field_usize(fields[0], "epoch", line)?,
            lr: field_f64(fields[1], "lr", line)?,
            keep_ratio: field_f64(fields[2], "keep_ratio", line)?,
            drop_ratio: field_f64(fields[3], "drop_ratio", line)?,
            kept_count: field_usize(fields[4], "kept_count", line)?,
            mean_kept_loss: field_f64(fields[5], "mean_kept_loss", line)?,
            test_acc: field_f64(fields[6], "test_acc", line)?,
            precision: field_opt(fields[7], "precision", line)?,
            recall: field_opt(fields[8], "recall", line)?,
            f1: field_opt(fields[9], "f1", line)?,
            auroc: field_opt(fields[10], "auroc", line)?,
            epoch_seconds: field_f64(fields[11], "epoch_seconds", line)?,
        })
    }
}

/// Outcome of one (method, seed) cell. Accuracies are fractions in [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_test_acc: f64,
    pub best_test_acc: f64,
    pub noise: NoiseReport,
    pub total_seconds: f64,
    pub probe_seconds: f64,
    pub mean_epoch_seconds: f64,
}

/// Per-method aggregation across seeds. `f1_mean` and `auroc_mean` are `None`
/// unless every seed produced a defined noise report; `overhead_pct` is `None`
/// without a positive baseline reference time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub best_mean: f64,
    pub best_std: f64,
    pub f1_mean: Option<f64>,
    pub auroc_mean: Option<f64>,
    pub mean_epoch_seconds: f64,
    pub overhead_pct: Option<f64>,
    pub seed_results: Vec<SeedResult>,
}

/// A cell that errored out; the suite records it and keeps going.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub seed: u64,
    pub error: String,
}

/// Everything a suite produced, including the verbatim configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteResult {
    pub config: RunConfig,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<CellFailure>,
}

/// Epoch logs of one completed cell, destined for `<method>_<seed>_epochs.csv`.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
}

struct Timer {
    mode: TimingMode,
    start: Instant,
}

impl Timer {
    fn start(mode: TimingMode) -> Timer {
        Timer {
            mode,
            start: Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        match self.mode {
            TimingMode::Wall => self.start.elapsed().as_secs_f64(),
            TimingMode::Zero => 0.0,
        }
    }
}

/// Materialize the configured dataset, including any noise injection.
pub fn build_dataset(cfg: &RunConfig) -> Result<LabeledDataset> {
    match &cfg.dataset {
        DatasetConfig::Blobs {
            classes,
            dim,
            n_train,
            n_test,
            separation,
            seed,
        } => {
            let ds = make_blobs(*classes, *dim, *n_train, *n_test, *separation, *seed)?;
            let kind = match cfg.noise.kind {
                NoiseKindConfig::None => return Ok(ds),
                NoiseKindConfig::Symmetric => NoiseKind::Symmetric,
                NoiseKindConfig::ClassConditional => NoiseKind::ClassConditional(
                    // The confusion matrix references the same centroids the
                    // generator drew, so it reuses the dataset seed.
                    nearest_centroid_confusion(*classes, *dim, *separation, *seed)?,
                ),
                NoiseKindConfig::FeatureOutlier => NoiseKind::FeatureOutlier,
            };
            inject_noise(
                ds,
                &NoiseSpec {
                    kind,
                    rate: cfg.noise.rate,
                    seed: cfg.noise.seed,
                },
            )
        }
        DatasetConfig::Csv {
            path,
            classes,
            dim,
            split,
            seed,
            has_header,
        } => load_csv(path, *classes, *dim, *split, *seed, *has_header),
    }
}

/// Turn the configured `rho_max` into a concrete schedule. `auto` estimates
/// the ceiling from ground-truth flags; without flags it is only an error if
/// some configured method actually consumes the ceiling.
pub fn resolve_schedule(cfg: &RunConfig, ds: &LabeledDataset) -> Result<ScheduleConfig> {
    let rho_max = match cfg.rho_max {
        RhoMax::Fixed(v) => v,
        RhoMax::Auto => {
            let needs_ceiling = cfg
                .methods
                .iter()
                .any(|m| matches!(m, Method::Truncation | Method::OneShot | Method::StepE));
            if !needs_ceiling {
                0.0
            } else if ds.noise_flags().is_some() {
                crate::selection::rho_max_from_estimate(empirical_noise_rate(ds)?)
            } else {
                return Err(Error::config(
                    "schedule.rho_max",
                    "auto needs ground-truth noise flags, which this dataset \
                     lacks; set a numeric value",
                ));
            }
        }
    };
    let schedule = ScheduleConfig {
        t_warm: cfg.t_warm,
        t_total: cfg.t_total,
        rho_max,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Train one (method, seed) cell: the full epoch loop of probe, select,
/// update, evaluate. Deterministic per (config, seed) up to wall-clock
/// columns; `TimingMode::Zero` removes those too.
pub fn run_single(
    cfg: &RunConfig,
    method: Method,
    seed: u64,
    ds: &LabeledDataset,
    schedule: &ScheduleConfig,
) -> Result<(SeedResult, Vec<EpochRecord>)> {
    cfg.opt.validate()?;
    let n = ds.n_train();
    let labels: &[usize] = if method == Method::Oracle {
        ds.clean_labels()
    } else {
        ds.noisy_labels()
    };
    let all_indices: Vec<usize> = (0..n).collect();
    let flags = ds.noise_flags();

    let mut model = ModelState::init(
        cfg.arch,
        ds.dim(),
        ds.n_classes(),
        stream_seed(seed, "init"),
    )?;
    let mut sel = SelectionState::new(method, n, cfg.permanent_drop);

    let mut records = Vec::with_capacity(cfg.t_total);
    let mut timings: Vec<TimingRecord> = Vec::with_capacity(cfg.t_total);
    let mut final_dropped: Vec<usize> = Vec::new();
    let run_timer = Timer::start(cfg.timing);

    for t in 0..cfg.t_total {
        let lr = cosine_lr(t, cfg.t_total, cfg.opt.lr0)?;
        let epoch_timer = Timer::start(cfg.timing);
        let mut probe_seconds = 0.0;

        let selection = {
            let model_ref = &model;
            let mut probe = || {
                let probe_timer = Timer::start(cfg.timing);
                let losses = model_ref.per_sample_losses(ds.x_train(), labels, &all_indices)?;
                probe_seconds += probe_timer.elapsed();
                Ok(losses)
            };
            sel.epoch(t, schedule, &mut probe)?
        };

        let shuffle_seed = stream_seed(seed, &format!("shuffle:{t}"));
        let mean_kept_loss = model.sgd_epoch(
            ds.x_train(),
            labels,
            &selection.kept,
            &cfg.opt,
            lr,
            shuffle_seed,
            selection.transform.clip_value(),
        )?;
        let test_acc = test_accuracy(&model, ds)?;

        let mut precision = None;
        let mut recall = None;
        let mut f1 = None;
        let mut auroc_value = None;
        if method.reports_noise_metrics() {
            if let Some(flags) = flags {
                let (p, r, f) = noise_prf(&selection.dropped, flags)?;
                precision = Some(p);
                recall = Some(r);
                f1 = Some(f);
                if selection.probed {
                    auroc_value = match auroc(sel.probe_losses(), flags) {
                        Ok(a) => Some(a),
                        Err(Error::Undefined(_)) => None,
                        Err(e) => return Err(e),
                    };
                }
            }
        }

        let kept_count = selection.kept.len();
        let keep_ratio = kept_count as f64 / n as f64;
        let epoch_seconds = epoch_timer.elapsed();
        timings.push(TimingRecord {
            epoch_seconds,
            probe_seconds,
        });
        records.push(EpochRecord {
            epoch: t,
            lr,
            keep_ratio,
            drop_ratio: 1.0 - keep_ratio,
            kept_count,
            mean_kept_loss,
            test_acc,
            precision,
            recall,
            f1,
            auroc: auroc_value,
            epoch_seconds,
        });
        final_dropped = selection.dropped;
    }

    let final_test_acc = records.last().expect("t_total >= 1").test_acc;
    let best_test_acc = records
        .iter()
        .map(|r| r.test_acc)
        .fold(f64::NEG_INFINITY, f64::max);

    let noise = match flags {
        Some(flags) if method.reports_noise_metrics() && !sel.probe_losses().is_empty() => {
            let (p, r, f) = noise_prf(&final_dropped, flags)?;
            let auroc_value = match auroc(sel.probe_losses(), flags) {
                Ok(a) => Some(a),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            NoiseReport {
                precision: p,
                recall: r,
                f1: f,
                auroc: auroc_value,
                dropped_count: final_dropped.len(),
                defined: true,
            }
        }
        _ => NoiseReport::undefined(),
    };

    let total_seconds = run_timer.elapsed();
    let probe_seconds = timings.iter().map(|t| t.probe_seconds).sum();
    let mean_epoch_seconds =
        timings.iter().map(|t| t.epoch_seconds).sum::<f64>() / cfg.t_total as f64;

    Ok((
        SeedResult {
            seed,
            final_test_acc,
            best_test_acc,
            noise,
            total_seconds,
            probe_seconds,
            mean_epoch_seconds,
        },
        records,
    ))
}

/// Aggregate completed seed runs of one method into a summary row.
/// `overhead_pct` is left unset; the suite fills it against its baseline.
pub fn summarize_method(method: Method, seed_results: Vec<SeedResult>) -> Result<MethodSummary> {
    if seed_results.is_empty() {
        return Err(Error::data("no completed runs to summarize"));
    }
    let finals: Vec<f64> = seed_results.iter().map(|r| r.final_test_acc).collect();
    let (acc_mean, acc_std) = aggregate_runs(&finals)?;
    let bests: Vec<f64> = seed_results.iter().map(|r| r.best_test_acc).collect();
    let (best_mean, best_std) = aggregate_runs(&bests)?;

    let all_defined = seed_results.iter().all(|r| r.noise.defined);
    let f1_mean = all_defined
        .then(|| seed_results.iter().map(|r| r.noise.f1).sum::<f64>() / seed_results.len() as f64);
    let auroc_mean = if all_defined {
        seed_results
            .iter()
            .map(|r| r.noise.auroc)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    } else {
        None
    };
    let mean_epoch_seconds = seed_results
        .iter()
        .map(|r| r.mean_epoch_seconds)
        .sum::<f64>()
        / seed_results.len() as f64;

    Ok(MethodSummary {
        method,
        acc_mean,
        acc_std,
        best_mean,
        best_std,
        f1_mean,
        auroc_mean,
        mean_epoch_seconds,
        overhead_pct: None,
        seed_results,
    })
}

/// Run every (method, seed) cell in configuration order. A failing cell is
/// recorded and skipped; the suite only errors when no work can start at all
/// (bad config or dataset). Timing overhead is referenced against the
/// baseline method's mean epoch seconds when that method ran.
pub fn run_suite(cfg: &RunConfig) -> Result<(SuiteResult, Vec<CellOutput>)> {
    cfg.validate()?;
    let ds = build_dataset(cfg)?;
    let schedule = resolve_schedule(cfg, &ds)?;

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut methods = Vec::new();
    for &method in &cfg.methods {
        let mut seed_results = Vec::new();
        for &seed in &cfg.seeds {
            match run_single(cfg, method, seed, &ds, &schedule) {
                Ok((result, records)) => {
                    seed_results.push(result);
                    cells.push(CellOutput {
                        method,
                        seed,
                        records,
                    });
                }
                Err(e) => failures.push(CellFailure {
                    method,
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        if !seed_results.is_empty() {
            methods.push(summarize_method(method, seed_results)?);
        }
    }

    let baseline_secs = methods
        .iter()
        .find(|m| m.method == Method::Baseline)
        .map(|m| m.mean_epoch_seconds);
    if let Some(base) = baseline_secs {
        if base > 0.0 {
            for m in &mut methods {
                m.overhead_pct = Some(overhead_pct(m.mean_epoch_seconds, base)?);
            }
        }
    }

    Ok((
        SuiteResult {
            config: cfg.clone(),
            methods,
            failures,
        },
        cells,
    ))
}

/// Write one `<method>_<seed>_epochs.csv` per cell plus `summary.json` into
/// the configured output directory, creating it if needed.
pub fn write_outputs(suite: &SuiteResult, cells: &[CellOutput]) -> Result<()> {
    let dir: &Path = &suite.config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    for cell in cells {
        let path = dir.join(format!("{}_{}_epochs.csv", cell.method, cell.seed));
        let mut text = String::with_capacity(cell.records.len() * 96);
        text.push_str(EPOCH_CSV_HEADER);
        text.push('\n');
        for record in &cell.records {
            text.push_str(&record.to_csv_row());
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(suite)
        .map_err(|e| Error::data(format!("summary serialization failed: {e}")))?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Run the whole suite and persist its outputs.
pub fn run_and_save(cfg: &RunConfig) -> Result<SuiteResult> {
    let (suite, cells) = run_suite(cfg)?;
    write_outputs(&suite, &cells)?;
    Ok(suite)
}
