//! Sample-selection training for label-noise robustness on synthetic data.
//!
//! The crate trains small softmax models with SGD while a selection policy
//! decides, epoch by epoch, which training samples participate. The central
//! policy re-ranks per-sample losses every epoch and drops a scheduled,
//! growing fraction of the highest-loss samples; classic alternatives
//! (loss truncation, self-paced ramping, a single one-shot filter) and a
//! clean-label oracle serve as baselines. Everything is deterministic per
//! (config, seed), down to the output bytes when wall-clock timing is off.
//!
//! Module map:
//! - [`model`]: linear and MLP softmax classifiers, Nesterov SGD, cosine lr.
//! - [`data`]: Gaussian blob generation, noise injection, CSV load/save.
//! - [`selection`]: keep/drop policies and the drop-ratio schedule.
//! - [`metrics`]: test accuracy, noise-detection PRF/AUROC, aggregation.
//! - [`config`]: typed run configuration and its text format.
//! - [`runner`]: the epoch loop, suite orchestration, persistence.
//! - [`report`]: SVG figures and markdown tables from persisted logs.

pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod runner;
pub mod selection;

pub use config::{
    parse_config, DatasetConfig, NoiseConfig, NoiseKindConfig, RhoMax, RunConfig, TimingMode,
};
pub use data::{
    blob_centroids, empirical_noise_rate, inject_noise, load_csv, make_blobs,
    nearest_centroid_confusion, save_csv, LabeledDataset, NoiseKind, NoiseSpec,
};
pub use error::{Error, Result};
pub use metrics::{
    aggregate_runs, auroc, noise_prf, overhead_pct, test_accuracy, NoiseReport, TimingRecord,
};
pub use model::{cosine_lr, Arch, ModelState, OptimizerConfig};
pub use report::{
    load_epochs_csv, render_convergence, render_dynamics, render_seed_band, render_tables, RunLog,
};
pub use rng::{stream, stream_seed};
pub use runner::{
    build_dataset, resolve_schedule, run_and_save, run_single, run_suite, summarize_method,
    write_outputs, CellFailure, CellOutput, EpochRecord, MethodSummary, SeedResult, SuiteResult,
    EPOCH_CSV_HEADER,
};
pub use selection::{
    objective_j, rho_max_from_estimate, rho_schedule, select_kept, EpochSelection, LossTransform,
    Method, ScheduleConfig, SelectionState,
};
