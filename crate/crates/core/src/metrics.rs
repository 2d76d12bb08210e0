//! Evaluation metrics: clean test accuracy, noise-detection quality of a
//! dropped set and of a loss ranking, timing overhead, and seed aggregation.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::ModelState;

/// Noise-detection quality of one run. `defined` is false when the dataset has
/// no ground-truth flags or the method never drops samples by gate. `auroc` is
/// `None` when undefined (no probe losses, or single-class flags).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: Option<f64>,
    pub dropped_count: usize,
    pub defined: bool,
}

impl NoiseReport {
    pub fn undefined() -> NoiseReport {
        NoiseReport {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            auroc: None,
            dropped_count: 0,
            defined: false,
        }
    }
}

/// Wall-clock cost of one epoch, with the probe pass broken out.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TimingRecord {
    pub epoch_seconds: f64,
    pub probe_seconds: f64,
}

/// Fraction of test samples whose argmax logit matches the clean test label.
/// Argmax ties break toward the lowest class index.
pub fn test_accuracy(model: &ModelState, ds: &LabeledDataset) -> Result<f64> {
    let n = ds.test_labels().len();
    if n == 0 {
        return Err(Error::data("empty test split"));
    }
    let logits = model.forward_logits(ds.x_test())?;
    let mut hits = 0usize;
    for (row, &label) in logits.rows().into_iter().zip(ds.test_labels()) {
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (k, &v) in row.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        if best == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / n as f64)
}

/// Precision, recall, and F1 of `dropped` against ground-truth flags.
///
/// An empty dropped set scores (0, 0, 0) by convention, so a method that
/// never drops anything cannot claim detection quality. F1 is 0 whenever
/// precision + recall is 0.
pub fn noise_prf(dropped: &[usize], flags: &[bool]) -> Result<(f64, f64, f64)> {
    if let Some(&bad) = dropped.iter().find(|&&i| i >= flags.len()) {
        return Err(Error::data(format!(
            "dropped index {bad} out of range for {} flags",
            flags.len()
        )));
    }
    if dropped.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let flagged = flags.iter().filter(|&&b| b).count();
    let tp = dropped.iter().filter(|&&i| flags[i]).count();
    let precision = tp as f64 / dropped.len() as f64;
    let recall = if flagged == 0 {
        0.0
    } else {
        tp as f64 / flagged as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Probability that a random flagged sample scores above a random clean one,
/// ties counting one half: the Mann-Whitney statistic with midranks.
pub fn auroc(scores: &[f64], flags: &[bool]) -> Result<f64> {
    if scores.len() != flags.len() {
        return Err(Error::data(format!(
            "{} scores for {} flags",
            scores.len(),
            flags.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("NaN score in AUROC input"));
    }
    let pos = flags.iter().filter(|&&b| b).count();
    let neg = flags.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("auroc"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN checked"));

    // Midranks: every member of a tie group gets the group's average rank.
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }

    let rank_sum: f64 = ranks
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(&r, _)| r)
        .sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Relative extra cost in percent: `100 * (t_method - t_ref) / t_ref`.
pub fn overhead_pct(t_method: f64, t_ref: f64) -> Result<f64> {
    if !(t_ref.is_finite() && t_ref > 0.0) {
        return Err(Error::data(format!(
            "reference time {t_ref} must be positive"
        )));
    }
    if !t_method.is_finite() {
        return Err(Error::data("non-finite method time"));
    }
    Ok(100.0 * (t_method - t_ref) / t_ref)
}

/// Mean and sample standard deviation (n-1 denominator; 0 for a single value).
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::data("nothing to aggregate"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
