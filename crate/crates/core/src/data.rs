//! Synthetic classification datasets plus label and feature corruption.
//!
//! Generators record ground-truth clean labels and per-sample noise flags.
//! Those two fields exist for the oracle method and for noise-detection
//! metrics only; nothing on the gradient path may read them.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// A train/test split with noisy training labels and hidden ground truth.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    x_train: Array2<f64>,
    y_noisy: Vec<usize>,
    y_clean: Vec<usize>,
    /// `Some` when ground truth is known; `flags[i]` marks corrupted samples.
    noise_flags: Option<Vec<bool>>,
    x_test: Array2<f64>,
    y_test: Vec<usize>,
    n_classes: usize,
    meta: String,
}

impl LabeledDataset {
    pub fn x_train(&self) -> &Array2<f64> {
        &self.x_train
    }

    /// Labels visible to training. Possibly corrupted.
    pub fn noisy_labels(&self) -> &[usize] {
        &self.y_noisy
    }

    /// Ground-truth labels. Restricted to the oracle method and metrics;
    /// ordinary training paths must not read these.
    pub fn clean_labels(&self) -> &[usize] {
        &self.y_clean
    }

    /// Ground-truth corruption flags, when known. Restricted to metrics.
    pub fn noise_flags(&self) -> Option<&[bool]> {
        self.noise_flags.as_deref()
    }

    pub fn x_test(&self) -> &Array2<f64> {
        &self.x_test
    }

    /// Test labels are always clean.
    pub fn test_labels(&self) -> &[usize] {
        &self.y_test
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_train(&self) -> usize {
        self.y_noisy.len()
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    /// Human-readable description of how the dataset was produced.
    pub fn meta(&self) -> &str {
        &self.meta
    }
}

/// How labels or features get corrupted.
#[derive(Debug, Clone)]
pub enum NoiseKind {
    /// Resample the label uniformly from the K-1 other classes.
    Symmetric,
    /// Resample the label from the sample's row of a K x K confusion matrix.
    /// A draw that lands on the original class leaves the sample clean.
    ClassConditional(Array2<f64>),
    /// Replace the features with uniform noise over the data bounding box;
    /// the label is untouched but the sample is flagged.
    FeatureOutlier,
}

/// A corruption request: what kind, how much, and its own seed.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if !(self.rate.is_finite() && (0.0..=1.0).contains(&self.rate)) {
            return Err(Error::config("dataset.noise_rate", "must lie in [0, 1]"));
        }
        if let NoiseKind::ClassConditional(m) = &self.kind {
            if m.nrows() != n_classes || m.ncols() != n_classes {
                return Err(Error::config(
                    "dataset.noise",
                    format!("confusion matrix must be {n_classes}x{n_classes}"),
                ));
            }
            for (c, row) in m.axis_iter(Axis(0)).enumerate() {
                if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(Error::config(
                        "dataset.noise",
                        format!("confusion row {c} has a negative or non-finite entry"),
                    ));
                }
                let s: f64 = row.sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::config(
                        "dataset.noise",
                        format!("confusion row {c} sums to {s}, expected 1"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let kind = match self.kind {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::ClassConditional(_) => "class_conditional",
            NoiseKind::FeatureOutlier => "feature_outlier",
        };
        format!("{kind}(rate={},seed={})", self.rate, self.seed)
    }
}

/// Class centroids used by [`make_blobs`]: standard normal directions scaled
/// onto a sphere of radius `separation`.
pub fn blob_centroids(
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::config("dataset.separation", "must be nonnegative"));
    }
    let mut rng = rng::stream(seed, "blobs:centroids");
    let mut centroids = Array2::zeros((n_classes, dim));
    for mut row in centroids.axis_iter_mut(Axis(0)) {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for (dst, src) in row.iter_mut().zip(&v) {
                    *dst = src * separation / norm;
                }
                break;
            }
        }
    }
    Ok(centroids)
}

/// Gaussian blobs: one unit-variance cluster per class, centroids `separation`
/// away from the origin, labels balanced within one sample per class.
pub fn make_blobs(
    n_classes: usize,
    dim: usize,
    n_train: usize,
    n_test: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_classes < 2 {
        return Err(Error::config("dataset.classes", "must be at least 2"));
    }
    if dim < 2 {
        return Err(Error::config("dataset.dim", "must be at least 2"));
    }
    if n_train < n_classes {
        return Err(Error::config(
            "dataset.n_train",
            "must be at least the class count",
        ));
    }
    if n_test < n_classes {
        return Err(Error::config(
            "dataset.n_test",
            "must be at least the class count",
        ));
    }
    let centroids = blob_centroids(n_classes, dim, separation, seed)?;

    let fill = |count: usize, label: &str| -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng::stream(seed, label);
        let mut x = Array2::zeros((count, dim));
        let mut y = Vec::with_capacity(count);
        for i in 0..count {
            let class = i % n_classes;
            y.push(class);
            for j in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                x[[i, j]] = centroids[[class, j]] + noise;
            }
        }
        (x, y)
    };
    let (x_train, y_train) = fill(n_train, "blobs:train");
    let (x_test, y_test) = fill(n_test, "blobs:test");

    Ok(LabeledDataset {
        x_train,
        y_noisy: y_train.clone(),
        y_clean: y_train,
        noise_flags: Some(vec![false; n_train]),
        x_test,
        y_test,
        n_classes,
        meta: format!(
            "blobs(k={n_classes},d={dim},n_train={n_train},n_test={n_test},sep={separation},seed={seed})"
        ),
    })
}

/// A confusion matrix that flips every class to its nearest other centroid,
/// a desk-scale stand-in for structured "human-like" label confusion.
pub fn nearest_centroid_confusion(
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    if n_classes < 2 {
        return Err(Error::config("dataset.classes", "must be at least 2"));
    }
    let centroids = blob_centroids(n_classes, dim, separation, seed)?;
    let mut confusion = Array2::zeros((n_classes, n_classes));
    for c in 0..n_classes {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for other in 0..n_classes {
            if other == c {
                continue;
            }
            let d2: f64 = (0..dim)
                .map(|j| {
                    let diff = centroids[[c, j]] - centroids[[other, j]];
                    diff * diff
                })
                .sum();
            if d2 < best_d {
                best_d = d2;
                best = other;
            }
        }
        confusion[[c, best]] = 1.0;
    }
    Ok(confusion)
}

/// Corrupt exactly `round(rate * n)` training samples chosen uniformly
/// without replacement. Clean labels are preserved; flags record the change.
pub fn inject_noise(mut ds: LabeledDataset, spec: &NoiseSpec) -> Result<LabeledDataset> {
    spec.validate(ds.n_classes)?;
    let flags = match ds.noise_flags.as_mut() {
        None => {
            return Err(Error::state(
                "dataset has no ground-truth flags; noise injection unsupported",
            ))
        }
        Some(f) if f.iter().any(|&b| b) => {
            return Err(Error::state("noise already injected into this dataset"))
        }
        Some(f) => f,
    };

    let n = ds.y_noisy.len();
    let count = (spec.rate * n as f64).round() as usize;
    let mut select_rng = rng::stream(spec.seed, "noise:select");
    let selected = rand::seq::index::sample(&mut select_rng, n, count).into_vec();
    let mut draw_rng = rng::stream(spec.seed, "noise:draw");

    match &spec.kind {
        NoiseKind::Symmetric => {
            for &i in &selected {
                let mut c = draw_rng.random_range(0..ds.n_classes - 1);
                if c >= ds.y_clean[i] {
                    c += 1;
                }
                ds.y_noisy[i] = c;
                flags[i] = true;
            }
        }
        NoiseKind::ClassConditional(confusion) => {
            for &i in &selected {
                let row = confusion.row(ds.y_clean[i]);
                let u: f64 = draw_rng.random();
                let mut acc = 0.0;
                let mut chosen = ds.n_classes - 1;
                for (c, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                ds.y_noisy[i] = chosen;
                flags[i] = chosen != ds.y_clean[i];
            }
        }
        NoiseKind::FeatureOutlier => {
            let dim = ds.x_train.ncols();
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for row in ds.x_train.axis_iter(Axis(0)) {
                for (j, &v) in row.iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            for &i in &selected {
                for j in 0..dim {
                    ds.x_train[[i, j]] = if lo[j] < hi[j] {
                        draw_rng.random_range(lo[j]..=hi[j])
                    } else {
                        lo[j]
                    };
                }
                flags[i] = true;
            }
        }
    }
    let _ = write!(ds.meta, "+{}", spec.describe());
    Ok(ds)
}

/// Fraction of flagged training samples. Used only to pick the drop-ratio
/// ceiling offline, never for per-sample decisions.
pub fn empirical_noise_rate(ds: &LabeledDataset) -> Result<f64> {
    let flags = ds
        .noise_flags()
        .ok_or_else(|| Error::state("dataset has no ground-truth noise flags"))?;
    if flags.is_empty() {
        return Err(Error::data("empty training split"));
    }
    Ok(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

/// Load a CSV dataset: `d` real feature columns then one integer label column.
///
/// Rows are split into train/test deterministically by hashing the row index
/// with `seed`; `round(split * n)` rows become training data, both splits keep
/// the original file order. Clean labels are unknown, so they are set equal to
/// the loaded labels and noise metrics stay disabled.
pub fn load_csv(
    path: &Path,
    n_classes: usize,
    dim: usize,
    split: f64,
    seed: u64,
    has_header: bool,
) -> Result<LabeledDataset> {
    if n_classes < 2 {
        return Err(Error::config("dataset.classes", "must be at least 2"));
    }
    if !(split.is_finite() && split > 0.0 && split <= 1.0) {
        return Err(Error::config("dataset.split", "must lie in (0, 1]"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                line: 1,
                msg: e.to_string(),
            },
        })?;

    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(labels.len() + 1);
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} columns, found {}", dim + 1, record.len()),
            });
        }
        for field in record.iter().take(dim) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a real number: `{field}`"),
            })?;
            features.push(v);
        }
        let label_field = record.get(dim).expect("length checked above");
        let label: usize = label_field.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("not an integer label: `{label_field}`"),
        })?;
        if label >= n_classes {
            return Err(Error::data(format!(
                "label {label} out of range for {n_classes} classes at line {line}"
            )));
        }
        labels.push(label);
    }

    let n = labels.len();
    if n == 0 {
        return Err(Error::data("CSV file contains no data rows"));
    }
    let n_train = (split * n as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::config("dataset.split", "train split is empty"));
    }

    // Rank rows by a seeded hash; the lowest-ranked n_train rows train.
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by_key(|&i| (rng::stream_seed(seed, &format!("split:{i}")), i));
    let mut is_train = vec![false; n];
    for &i in ranked.iter().take(n_train) {
        is_train[i] = true;
    }

    let gather = |want_train: bool| -> (Array2<f64>, Vec<usize>) {
        let rows: Vec<usize> = (0..n).filter(|&i| is_train[i] == want_train).collect();
        let mut x = Array2::zeros((rows.len(), dim));
        let mut y = Vec::with_capacity(rows.len());
        for (out_i, &i) in rows.iter().enumerate() {
            for j in 0..dim {
                x[[out_i, j]] = features[i * dim + j];
            }
            y.push(labels[i]);
        }
        (x, y)
    };
    let (x_train, y_train) = gather(true);
    let (x_test, y_test) = gather(false);

    Ok(LabeledDataset {
        x_train,
        y_noisy: y_train.clone(),
        y_clean: y_train,
        noise_flags: None,
        x_test,
        y_test,
        n_classes,
        meta: format!(
            "csv({},k={n_classes},d={dim},split={split},seed={seed}) no ground truth",
            path.display()
        ),
    })
}

/// Write a dataset as CSV (train rows first, then test rows) with a header.
/// Floats round-trip exactly through [`load_csv`].
pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..ds.dim() {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label\n");
    let mut dump = |x: &Array2<f64>, y: &[usize]| {
        for (row, &label) in x.axis_iter(Axis(0)).zip(y) {
            for v in row.iter() {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
    };
    dump(&ds.x_train, &ds.y_noisy);
    dump(&ds.x_test, &ds.y_test);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
