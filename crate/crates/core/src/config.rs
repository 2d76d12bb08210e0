//! Experiment configuration: typed structure, defaults, and the flat
//! `key = value` file format with dotted sections.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arch, OptimizerConfig};
use crate::selection::Method;

/// Where the training data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Blobs {
        classes: usize,
        dim: usize,
        n_train: usize,
        n_test: usize,
        separation: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        classes: usize,
        dim: usize,
        split: f64,
        seed: u64,
        has_header: bool,
    },
}

/// Label or feature corruption applied after generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindConfig {
    None,
    Symmetric,
    /// Flip to the class of the nearest other centroid (blobs only).
    ClassConditional,
    FeatureOutlier,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKindConfig,
    pub rate: f64,
    pub seed: u64,
}

/// Drop-ratio ceiling: a fixed value, or derived from the empirical noise
/// rate as `min(0.5, rate + 0.05)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMax {
    Auto,
    Fixed(f64),
}

/// Whether epoch timings record wall-clock seconds or constant zero.
/// `Zero` makes every output byte a pure function of (config, seed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    Wall,
    Zero,
}

/// Everything one experiment needs. Serialized verbatim into `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub noise: NoiseConfig,
    pub arch: Arch,
    pub opt: OptimizerConfig,
    pub t_warm: usize,
    pub t_total: usize,
    pub rho_max: RhoMax,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Step-wise method only: never re-admit a dropped sample.
    pub permanent_drop: bool,
    /// Weight of the kept-fraction bonus in the diagnostic objective.
    pub lambda: f64,
    pub timing: TimingMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::Blobs {
                classes: 20,
                dim: 64,
                n_train: 10_000,
                n_test: 2_000,
                separation: 6.0,
                seed: 7,
            },
            noise: NoiseConfig {
                kind: NoiseKindConfig::Symmetric,
                rate: 0.4,
                seed: 11,
            },
            arch: Arch::Mlp { hidden: 64 },
            opt: OptimizerConfig::default(),
            t_warm: 10,
            t_total: 60,
            rho_max: RhoMax::Auto,
            methods: Method::ALL.to_vec(),
            seeds: vec![13, 21, 42],
            out_dir: PathBuf::from("runs"),
            permanent_drop: false,
            lambda: 0.0,
            timing: TimingMode::Wall,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_config(&text)
    }

    /// Cross-field checks shared by the parser and programmatic construction.
    pub fn validate(&self) -> Result<()> {
        self.opt.validate()?;
        if self.t_total == 0 {
            return Err(Error::config("schedule.t_total", "must be at least 1"));
        }
        if self.t_warm >= self.t_total {
            return Err(Error::config(
                "schedule.t_warm",
                format!(
                    "warm-up {} must be shorter than t_total {}",
                    self.t_warm, self.t_total
                ),
            ));
        }
        if let RhoMax::Fixed(v) = self.rho_max {
            if !(v.is_finite() && (0.0..=0.5).contains(&v)) {
                return Err(Error::config(
                    "schedule.rho_max",
                    "must lie in [0, 0.5]; the drop ratio is capped at 0.5",
                ));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::config("run.methods", "need at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::config(
                    "run.methods",
                    format!("duplicate method `{m}`"),
                ));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::config("run.seeds", "need at least one seed"));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(Error::config("run.seeds", format!("duplicate seed {s}")));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("run.lambda", "must be nonnegative"));
        }
        if !(self.noise.rate.is_finite() && (0.0..=1.0).contains(&self.noise.rate)) {
            return Err(Error::config("dataset.noise_rate", "must lie in [0, 1]"));
        }
        if matches!(self.dataset, DatasetConfig::Csv { .. })
            && self.noise.kind != NoiseKindConfig::None
        {
            return Err(Error::config(
                "dataset.noise",
                "noise injection needs generated data with ground truth; \
                 csv datasets have none (set dataset.noise = none)",
            ));
        }
        Ok(())
    }
}

fn parse_typed<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("invalid value `{value}`: expected {expected}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("invalid value `{value}`: expected true or false"),
        )),
    }
}

fn parse_arch(key: &str, value: &str) -> Result<Arch> {
    if value == "linear" {
        return Ok(Arch::SoftmaxLinear);
    }
    if let Some(width) = value.strip_prefix("mlp:") {
        let hidden = parse_typed::<usize>(key, width, "a positive hidden width")?;
        if hidden == 0 {
            return Err(Error::config(key, "hidden width must be at least 1"));
        }
        return Ok(Arch::Mlp { hidden });
    }
    Err(Error::config(
        key,
        format!("invalid value `{value}`: expected linear or mlp:<width>"),
    ))
}

/// Raw per-key state: everything optional until assembly.
#[derive(Default)]
struct Builder {
    kind: Option<String>,
    classes: Option<usize>,
    dim: Option<usize>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    separation: Option<f64>,
    ds_seed: Option<u64>,
    path: Option<PathBuf>,
    split: Option<f64>,
    has_header: Option<bool>,
    noise_kind: Option<NoiseKindConfig>,
    noise_rate: Option<f64>,
    noise_seed: Option<u64>,
    lr0: Option<f64>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    batch_size: Option<usize>,
    t_warm: Option<usize>,
    t_total: Option<usize>,
    rho_max: Option<RhoMax>,
    arch: Option<Arch>,
    methods: Option<Vec<Method>>,
    seeds: Option<Vec<u64>>,
    out: Option<PathBuf>,
    permanent_drop: Option<bool>,
    lambda: Option<f64>,
    timing: Option<TimingMode>,
}

/// Parse the flat `key = value` format. `#` starts a comment, blank lines are
/// skipped, unknown keys are rejected by full dotted path, and omitted keys
/// fall back to the defaults in [`RunConfig::default`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut b = Builder::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            msg: "expected `key = value`".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();

        match key {
            "dataset.kind" => match value {
                "blobs" | "csv" => b.kind = Some(value.to_string()),
                _ => {
                    return Err(Error::config(
                        key,
                        format!("invalid value `{value}`: expected blobs or csv"),
                    ))
                }
            },
            "dataset.classes" => b.classes = Some(parse_typed(key, value, "an integer")?),
            "dataset.dim" => b.dim = Some(parse_typed(key, value, "an integer")?),
            "dataset.n_train" => b.n_train = Some(parse_typed(key, value, "an integer")?),
            "dataset.n_test" => b.n_test = Some(parse_typed(key, value, "an integer")?),
            "dataset.separation" => b.separation = Some(parse_typed(key, value, "a real number")?),
            "dataset.seed" => b.ds_seed = Some(parse_typed(key, value, "an integer")?),
            "dataset.path" => b.path = Some(PathBuf::from(value)),
            "dataset.split" => b.split = Some(parse_typed(key, value, "a real number")?),
            "dataset.has_header" => b.has_header = Some(parse_bool(key, value)?),
            "dataset.noise" => {
                b.noise_kind = Some(match value {
                    "none" => NoiseKindConfig::None,
                    "symmetric" => NoiseKindConfig::Symmetric,
                    "class_conditional" => NoiseKindConfig::ClassConditional,
                    "feature_outlier" => NoiseKindConfig::FeatureOutlier,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!(
                                "invalid value `{value}`: expected none, symmetric, \
                                 class_conditional, or feature_outlier"
                            ),
                        ))
                    }
                })
            }
            "dataset.noise_rate" => b.noise_rate = Some(parse_typed(key, value, "a real number")?),
            "dataset.noise_seed" => b.noise_seed = Some(parse_typed(key, value, "an integer")?),
            "opt.lr0" => b.lr0 = Some(parse_typed(key, value, "a real number")?),
            "opt.momentum" => b.momentum = Some(parse_typed(key, value, "a real number")?),
            "opt.weight_decay" => b.weight_decay = Some(parse_typed(key, value, "a real number")?),
            "opt.batch_size" => b.batch_size = Some(parse_typed(key, value, "an integer")?),
            "schedule.t_warm" => b.t_warm = Some(parse_typed(key, value, "an integer")?),
            "schedule.t_total" => b.t_total = Some(parse_typed(key, value, "an integer")?),
            "schedule.rho_max" => {
                b.rho_max = Some(if value == "auto" {
                    RhoMax::Auto
                } else {
                    RhoMax::Fixed(parse_typed(key, value, "a real number or auto")?)
                })
            }
            "run.arch" => b.arch = Some(parse_arch(key, value)?),
            "run.methods" => {
                let methods: Result<Vec<Method>> =
                    value.split(',').map(|s| s.trim().parse()).collect();
                b.methods = Some(methods?);
            }
            "run.seeds" => {
                let seeds: Result<Vec<u64>> = value
                    .split(',')
                    .map(|s| parse_typed("run.seeds", s.trim(), "an integer"))
                    .collect();
                b.seeds = Some(seeds?);
            }
            "run.out" => b.out = Some(PathBuf::from(value)),
            "run.permanent_drop" => b.permanent_drop = Some(parse_bool(key, value)?),
            "run.lambda" => b.lambda = Some(parse_typed(key, value, "a real number")?),
            "run.timing" => {
                b.timing = Some(match value {
                    "wall" => TimingMode::Wall,
                    "zero" => TimingMode::Zero,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("invalid value `{value}`: expected wall or zero"),
                        ))
                    }
                })
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
    }

    let mut cfg = RunConfig::default();

    let kind = b.kind.as_deref().unwrap_or("blobs");
    match kind {
        "blobs" => {
            for (set, key) in [
                (b.path.is_some(), "dataset.path"),
                (b.split.is_some(), "dataset.split"),
                (b.has_header.is_some(), "dataset.has_header"),
            ] {
                if set {
                    return Err(Error::config(key, "only valid with dataset.kind = csv"));
                }
            }
            let DatasetConfig::Blobs {
                classes,
                dim,
                n_train,
                n_test,
                separation,
                seed,
            } = cfg.dataset
            else {
                unreachable!("default dataset is blobs");
            };
            cfg.dataset = DatasetConfig::Blobs {
                classes: b.classes.unwrap_or(classes),
                dim: b.dim.unwrap_or(dim),
                n_train: b.n_train.unwrap_or(n_train),
                n_test: b.n_test.unwrap_or(n_test),
                separation: b.separation.unwrap_or(separation),
                seed: b.ds_seed.unwrap_or(seed),
            };
        }
        "csv" => {
            for (set, key) in [
                (b.n_train.is_some(), "dataset.n_train"),
                (b.n_test.is_some(), "dataset.n_test"),
                (b.separation.is_some(), "dataset.separation"),
            ] {
                if set {
                    return Err(Error::config(key, "only valid with dataset.kind = blobs"));
                }
            }
            let path = b
                .path
                .ok_or_else(|| Error::config("dataset.path", "required when dataset.kind = csv"))?;
            cfg.dataset = DatasetConfig::Csv {
                path,
                classes: b.classes.unwrap_or(20),
                dim: b.dim.unwrap_or(64),
                split: b.split.unwrap_or(0.8),
                seed: b.ds_seed.unwrap_or(7),
                has_header: b.has_header.unwrap_or(true),
            };
            // CSV data has no ground truth, so noise defaults off.
            cfg.noise.kind = NoiseKindConfig::None;
        }
        _ => unreachable!("kind validated during parsing"),
    }

    if let Some(kind) = b.noise_kind {
        cfg.noise.kind = kind;
    }
    if let Some(rate) = b.noise_rate {
        cfg.noise.rate = rate;
    }
    if let Some(seed) = b.noise_seed {
        cfg.noise.seed = seed;
    }
    if let Some(v) = b.lr0 {
        cfg.opt.lr0 = v;
    }
    if let Some(v) = b.momentum {
        cfg.opt.momentum = v;
    }
    if let Some(v) = b.weight_decay {
        cfg.opt.weight_decay = v;
    }
    if let Some(v) = b.batch_size {
        cfg.opt.batch_size = v;
    }
    if let Some(v) = b.t_warm {
        cfg.t_warm = v;
    }
    if let Some(v) = b.t_total {
        cfg.t_total = v;
    }
    if let Some(v) = b.rho_max {
        cfg.rho_max = v;
    }
    if let Some(v) = b.arch {
        cfg.arch = v;
    }
    if let Some(v) = b.methods {
        cfg.methods = v;
    }
    if let Some(v) = b.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = b.out {
        cfg.out_dir = v;
    }
    if let Some(v) = b.permanent_drop {
        cfg.permanent_drop = v;
    }
    if let Some(v) = b.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = b.timing {
        cfg.timing = v;
    }

    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_recipe_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.t_total, 60);
        assert_eq!(cfg.t_warm, 10);
        assert_eq!(cfg.opt.lr0, 0.1);
        assert_eq!(cfg.opt.momentum, 0.9);
        assert_eq!(cfg.opt.weight_decay, 5e-4);
        assert_eq!(cfg.opt.batch_size, 128);
        assert_eq!(cfg.seeds, vec![13, 21, 42]);
        assert_eq!(cfg.methods.len(), 6);
        assert_eq!(cfg.rho_max, RhoMax::Auto);
        assert!(matches!(cfg.arch, Arch::Mlp { hidden: 64 }));
        assert!(matches!(
            cfg.dataset,
            DatasetConfig::Blobs {
                classes: 20,
                dim: 64,
                n_train: 10_000,
                n_test: 2_000,
                ..
            }
        ));
        assert_eq!(cfg.noise.kind, NoiseKindConfig::Symmetric);
        assert_eq!(cfg.noise.rate, 0.4);
    }

    #[test]
    fn comments_whitespace_and_overrides() {
        let text = "
            # benchmark, but smaller
            dataset.n_train = 600   # fewer samples
            dataset.n_test = 200
            schedule.t_total = 20
            run.methods = baseline, step_e
            run.seeds = 1, 2
            run.arch = linear
            run.timing = zero
        ";
        let cfg = parse_config(text).unwrap();
        assert!(matches!(
            cfg.dataset,
            DatasetConfig::Blobs {
                n_train: 600,
                n_test: 200,
                ..
            }
        ));
        assert_eq!(cfg.t_total, 20);
        assert_eq!(cfg.methods, vec![Method::Baseline, Method::StepE]);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.arch, Arch::SoftmaxLinear);
        assert_eq!(cfg.timing, TimingMode::Zero);
    }

    #[test]
    fn unknown_key_is_rejected_by_path() {
        let err = parse_config("dataset.classez = 5").unwrap_err();
        match err {
            Error::Config { key, msg } => {
                assert_eq!(key, "dataset.classez");
                assert!(msg.contains("unknown key"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = parse_config("opt.lr0 = fast").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "opt.lr0"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn warmup_must_fit_inside_training() {
        let err = parse_config("schedule.t_warm = 70").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "schedule.t_warm"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rho_max_above_cap_is_rejected() {
        let err = parse_config("schedule.rho_max = 0.7").unwrap_err();
        match err {
            Error::Config { key, msg } => {
                assert_eq!(key, "schedule.rho_max");
                assert!(msg.contains("0.5"), "message should cite the cap: {msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn csv_configs_reject_blob_keys_and_noise() {
        let err =
            parse_config("dataset.kind = csv\ndataset.path = x.csv\ndataset.separation = 2.0")
                .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "dataset.separation"));

        let err =
            parse_config("dataset.kind = csv\ndataset.path = x.csv\ndataset.noise = symmetric")
                .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "dataset.noise"));

        let err = parse_config("dataset.kind = csv").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "dataset.path"));

        let ok = parse_config("dataset.kind = csv\ndataset.path = x.csv").unwrap();
        assert_eq!(ok.noise.kind, NoiseKindConfig::None);
    }

    #[test]
    fn bad_lines_report_numbers() {
        let err = parse_config("opt.lr0 = 0.1\nnot a key value line\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_seeds_and_methods_are_rejected() {
        assert!(parse_config("run.seeds = 1, 1").is_err());
        assert!(parse_config("run.methods = step_e, step_e").is_err());
        assert!(parse_config("run.methods = step_x").is_err());
    }
}
