//! Sample-selection policies: the stepwise-elimination schedule and the
//! baselines it is compared against.
//!
//! Every policy exposes one entry point, [`SelectionState::epoch`], which
//! decides the kept index set for the coming epoch and, where needed, runs a
//! probe pass through the supplied closure. Probe losses are computed with the
//! model as it stands at the start of the epoch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training policy. Names match the config-file spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Truncation,
    SelfPaced,
    OneShot,
    StepE,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::Truncation,
        Method::SelfPaced,
        Method::OneShot,
        Method::StepE,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Truncation => "truncation",
            Method::SelfPaced => "self_paced",
            Method::OneShot => "one_shot",
            Method::StepE => "step_e",
            Method::Oracle => "oracle",
        }
    }

    /// Whether the method produces a meaningful dropped set and loss ranking
    /// for noise-detection metrics.
    pub fn reports_noise_metrics(self) -> bool {
        matches!(self, Method::SelfPaced | Method::OneShot | Method::StepE)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "run.methods",
                    format!(
                        "unknown method `{s}`; expected one of baseline, truncation, \
                         self_paced, one_shot, step_e, oracle"
                    ),
                )
            })
    }
}

/// Warm-up length, total epochs, and the drop-ratio ceiling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleConfig {
    pub t_warm: usize,
    pub t_total: usize,
    pub rho_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            t_warm: 10,
            t_total: 60,
            rho_max: 0.5,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
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
        if !(self.rho_max.is_finite() && (0.0..=0.5).contains(&self.rho_max)) {
            return Err(Error::config(
                "schedule.rho_max",
                "must lie in [0, 0.5]; the drop ratio is capped at 0.5",
            ));
        }
        Ok(())
    }
}

/// Drop ratio at epoch `t`: zero through warm-up, then a linear ramp that
/// would reach `rho_max` one epoch past the end of training.
pub fn rho_schedule(t: usize, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.validate()?;
    if t >= cfg.t_total {
        return Err(Error::config(
            "schedule.t_total",
            format!(
                "epoch index {t} is out of range for t_total={}",
                cfg.t_total
            ),
        ));
    }
    if t < cfg.t_warm {
        Ok(0.0)
    } else {
        Ok(cfg.rho_max * (t - cfg.t_warm) as f64 / (cfg.t_total - cfg.t_warm) as f64)
    }
}

/// Drop-ratio ceiling from an offline noise-rate estimate, with a 0.05 margin
/// and a hard cap at 0.5.
pub fn rho_max_from_estimate(rho_hat: f64) -> f64 {
    (rho_hat + 0.05).min(0.5)
}

/// Indices of the `count` smallest losses, ties broken by smaller index.
/// The result is sorted ascending.
fn select_lowest(losses: &[f64], count: usize) -> Result<Vec<usize>> {
    if losses.iter().any(|l| l.is_nan()) {
        return Err(Error::data("NaN loss in selection input"));
    }
    debug_assert!(count <= losses.len());
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| {
        losses[a]
            .partial_cmp(&losses[b])
            .expect("NaN filtered above")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(count).collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Keep the lowest-loss `round(keep_fraction * n)` samples, never fewer than
/// one. Ties break toward the smaller index.
pub fn select_kept(losses: &[f64], keep_fraction: f64) -> Result<Vec<usize>> {
    if losses.is_empty() {
        return Err(Error::data("empty loss vector"));
    }
    if !(keep_fraction.is_finite() && keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::data(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let count = ((keep_fraction * losses.len() as f64).round() as usize).clamp(1, losses.len());
    select_lowest(losses, count)
}

/// Diagnostic value of the gated objective:
/// mean gated loss plus `lambda` times the kept fraction.
pub fn objective_j(losses: &[f64], gamma: &[bool], lambda: f64) -> Result<f64> {
    if losses.len() != gamma.len() {
        return Err(Error::data(format!(
            "{} losses for {} gates",
            losses.len(),
            gamma.len()
        )));
    }
    if gamma.is_empty() {
        return Err(Error::data("empty gate vector"));
    }
    let n = gamma.len() as f64;
    let mut loss_sum = 0.0;
    let mut kept = 0.0;
    for (&l, &g) in losses.iter().zip(gamma) {
        if g {
            loss_sum += l;
            kept += 1.0;
        }
    }
    Ok(loss_sum / n + lambda * kept / n)
}

/// How training losses are transformed this epoch. `Truncate(tau)` caps each
/// per-sample loss at `tau`, which zeroes the gradient of samples above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossTransform {
    Identity,
    Truncate(f64),
}

impl LossTransform {
    /// The cap value, if any, in the form the trainer consumes.
    pub fn clip_value(self) -> Option<f64> {
        match self {
            LossTransform::Identity => None,
            LossTransform::Truncate(tau) => Some(tau),
        }
    }
}

/// What the policy decided for one epoch.
#[derive(Debug, Clone)]
pub struct EpochSelection {
    /// Indices to train on, sorted ascending.
    pub kept: Vec<usize>,
    /// Complement of `kept`, sorted ascending.
    pub dropped: Vec<usize>,
    pub transform: LossTransform,
    /// Whether a probe pass ran this epoch.
    pub probed: bool,
}

/// Method-specific carry-over between epochs. The self-paced ramp is a pure
/// function of the epoch index, so that policy needs none.
#[derive(Debug, Clone)]
enum Memory {
    None,
    Truncation { tau: Option<f64> },
    OneShot { dropped: Option<Vec<usize>> },
}

/// Per-sample gates plus everything a policy remembers between epochs.
#[derive(Debug, Clone)]
pub struct SelectionState {
    method: Method,
    n: usize,
    permanent_drop: bool,
    gamma: Vec<bool>,
    probe_losses: Vec<f64>,
    rho_t: f64,
    memory: Memory,
}

impl SelectionState {
    /// Fresh state with all gates open.
    ///
    /// `permanent_drop` only affects the step-wise method: when set, a sample
    /// dropped once stays dropped, instead of being re-decided each epoch.
    pub fn new(method: Method, n: usize, permanent_drop: bool) -> Self {
        let memory = match method {
            Method::Truncation => Memory::Truncation { tau: None },
            Method::OneShot => Memory::OneShot { dropped: None },
            _ => Memory::None,
        };
        SelectionState {
            method,
            n,
            permanent_drop,
            gamma: vec![true; n],
            probe_losses: Vec::new(),
            rho_t: 0.0,
            memory,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Current gates; `true` means the sample trains.
    pub fn gamma(&self) -> &[bool] {
        &self.gamma
    }

    /// Losses from the most recent probe pass; empty before the first probe.
    pub fn probe_losses(&self) -> &[f64] {
        &self.probe_losses
    }

    /// Fraction of samples currently dropped (for the step-wise method, the
    /// schedule value).
    pub fn rho_t(&self) -> f64 {
        self.rho_t
    }

    /// Fitted truncation threshold, once available.
    pub fn tau(&self) -> Option<f64> {
        match &self.memory {
            Memory::Truncation { tau } => *tau,
            _ => None,
        }
    }

    /// Decide the kept set for epoch `t`. `probe` evaluates the per-sample
    /// losses of all `n` training samples under the current model; it is only
    /// invoked when the policy needs fresh losses.
    pub fn epoch(
        &mut self,
        t: usize,
        cfg: &ScheduleConfig,
        probe: &mut dyn FnMut() -> Result<Vec<f64>>,
    ) -> Result<EpochSelection> {
        cfg.validate()?;
        if t >= cfg.t_total {
            return Err(Error::config(
                "schedule.t_total",
                format!(
                    "epoch index {t} is out of range for t_total={}",
                    cfg.t_total
                ),
            ));
        }
        if self.n == 0 {
            return Err(Error::state("selection over an empty dataset"));
        }

        let mut probed = false;
        let mut run_probe = |state: &mut Vec<f64>| -> Result<()> {
            let losses = probe()?;
            if losses.len() != self.n {
                return Err(Error::data(format!(
                    "probe returned {} losses for {} samples",
                    losses.len(),
                    self.n
                )));
            }
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::data("non-finite loss in probe pass"));
            }
            *state = losses;
            probed = true;
            Ok(())
        };

        let mut transform = LossTransform::Identity;
        let kept: Vec<usize> = match self.method {
            Method::Baseline | Method::Oracle => (0..self.n).collect(),
            Method::Truncation => {
                if t == 1 && self.tau().is_none() {
                    run_probe(&mut self.probe_losses)?;
                    let keep_count = (self.n - drop_count(cfg.rho_max, self.n)).max(1);
                    let ranked = select_lowest(&self.probe_losses, keep_count)?;
                    // tau = the (1 - rho_max)-quantile: the largest loss that
                    // would still be kept.
                    let tau_value = ranked
                        .iter()
                        .map(|&i| self.probe_losses[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    self.memory = Memory::Truncation {
                        tau: Some(tau_value),
                    };
                }
                if let Some(tau) = self.tau() {
                    transform = LossTransform::Truncate(tau);
                }
                (0..self.n).collect()
            }
            Method::SelfPaced => {
                run_probe(&mut self.probe_losses)?;
                select_kept(&self.probe_losses, self_paced_keep_ratio(t, cfg))?
            }
            Method::OneShot => {
                let already = match &self.memory {
                    Memory::OneShot { dropped } => dropped.clone(),
                    _ => unreachable!("one-shot state carries one-shot memory"),
                };
                match already {
                    None if t < cfg.t_warm => (0..self.n).collect(),
                    None => {
                        run_probe(&mut self.probe_losses)?;
                        let keep_count = (self.n - drop_count(cfg.rho_max, self.n)).max(1);
                        let kept = select_lowest(&self.probe_losses, keep_count)?;
                        let dropped = complement(&kept, self.n);
                        self.memory = Memory::OneShot {
                            dropped: Some(dropped),
                        };
                        kept
                    }
                    Some(dropped) => {
                        if t == cfg.t_total - 1 {
                            // Refresh scores so final-epoch metrics rank with
                            // current losses, like the other probing methods.
                            run_probe(&mut self.probe_losses)?;
                        }
                        complement(&dropped, self.n)
                    }
                }
            }
            Method::StepE => {
                run_probe(&mut self.probe_losses)?;
                let rho = rho_schedule(t, cfg)?;
                self.rho_t = rho;
                let target = drop_count(rho, self.n).min(self.n - 1);
                if self.permanent_drop {
                    let open: Vec<usize> = (0..self.n).filter(|&i| self.gamma[i]).collect();
                    let already = self.n - open.len();
                    if target > already {
                        let need = target - already;
                        let open_losses: Vec<f64> =
                            open.iter().map(|&i| self.probe_losses[i]).collect();
                        let keep_local = select_lowest(&open_losses, open.len() - need)?;
                        keep_local.into_iter().map(|j| open[j]).collect()
                    } else {
                        open
                    }
                } else {
                    select_lowest(&self.probe_losses, self.n - target)?
                }
            }
        };

        let dropped = complement(&kept, self.n);
        match self.method {
            Method::Baseline | Method::Oracle | Method::Truncation => {
                // Gates stay open; truncation filters through the loss cap.
                self.rho_t = 0.0;
            }
            Method::StepE => {
                self.set_gamma(&kept);
                // rho_t already holds the schedule value.
            }
            Method::SelfPaced | Method::OneShot => {
                self.set_gamma(&kept);
                self.rho_t = dropped.len() as f64 / self.n as f64;
            }
        }

        Ok(EpochSelection {
            kept,
            dropped,
            transform,
            probed,
        })
    }

    fn set_gamma(&mut self, kept: &[usize]) {
        self.gamma.iter_mut().for_each(|g| *g = false);
        for &i in kept {
            self.gamma[i] = true;
        }
    }
}

/// Number of samples to drop at ratio `rho`, rounded half away from zero.
fn drop_count(rho: f64, n: usize) -> usize {
    (rho * n as f64).round() as usize
}

/// Keep ratio for the self-paced baseline: 1.0 through warm-up, then a ramp
/// from 0.5 that reaches 1.0 at the final epoch.
fn self_paced_keep_ratio(t: usize, cfg: &ScheduleConfig) -> f64 {
    if t < cfg.t_warm {
        return 1.0;
    }
    let span = cfg.t_total - 1 - cfg.t_warm;
    if span == 0 {
        return 1.0;
    }
    0.5 + 0.5 * (t - cfg.t_warm) as f64 / span as f64
}

/// Sorted complement of a sorted index set within `0..n`.
fn complement(sorted: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_warm: usize, t_total: usize, rho_max: f64) -> ScheduleConfig {
        ScheduleConfig {
            t_warm,
            t_total,
            rho_max,
        }
    }

    fn no_probe() -> impl FnMut() -> Result<Vec<f64>> {
        || panic!("this policy must not probe")
    }

    fn fixed(losses: Vec<f64>) -> impl FnMut() -> Result<Vec<f64>> {
        move || Ok(losses.clone())
    }

    #[test]
    fn schedule_matches_hand_values() {
        let c = cfg(10, 60, 0.45);
        assert_eq!(rho_schedule(9, &c).unwrap(), 0.0);
        assert!((rho_schedule(35, &c).unwrap() - 0.225).abs() < 1e-15);
        assert!((rho_schedule(59, &c).unwrap() - 0.441).abs() < 1e-15);
    }

    #[test]
    fn schedule_is_monotone_with_known_max() {
        let c = cfg(3, 17, 0.37);
        let values: Vec<f64> = (0..17).map(|t| rho_schedule(t, &c).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let expected_max = 0.37 * 13.0 / 14.0;
        assert!((values[16] - expected_max).abs() < 1e-15);
        assert!(values[..3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schedule_rejects_out_of_range() {
        let c = cfg(10, 60, 0.45);
        assert!(rho_schedule(60, &c).is_err());
        assert!(cfg(60, 60, 0.4).validate().is_err());
        assert!(cfg(0, 10, 0.7).validate().is_err());
    }

    #[test]
    fn rho_max_rule() {
        assert!((rho_max_from_estimate(0.40) - 0.45).abs() < 1e-15);
        assert_eq!(rho_max_from_estimate(0.60), 0.5);
        assert!((rho_max_from_estimate(0.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn select_kept_basics() {
        assert_eq!(select_kept(&[0.1, 2.0, 0.5, 3.0], 0.5).unwrap(), vec![0, 2]);
        assert_eq!(select_kept(&[1.0, 1.0, 1.0, 1.0], 0.25).unwrap(), vec![0]);
        assert_eq!(select_kept(&[5.0, 1.0, 3.0], 1.0).unwrap(), vec![0, 1, 2]);
        assert!(select_kept(&[1.0, f64::NAN], 0.5).is_err());
        assert!(select_kept(&[], 0.5).is_err());
        assert!(select_kept(&[1.0], 0.0).is_err());
        // Rounding down to zero still keeps one sample.
        assert_eq!(select_kept(&[4.0, 2.0, 9.0], 0.1).unwrap(), vec![1]);
    }

    #[test]
    fn select_kept_is_permutation_equivariant() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = 7 + trial % 5;
            let losses: Vec<f64> = (0..n)
                .map(|i| ((i * 37 + trial * 11) % 101) as f64)
                .collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<f64> = perm.iter().map(|&i| losses[i]).collect();
            let direct = select_kept(&losses, 0.5).unwrap();
            let via_perm = select_kept(&permuted, 0.5).unwrap();
            let mut mapped: Vec<usize> = via_perm.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            assert_eq!(direct, mapped, "trial {trial}");
        }
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective_j(&[3.0, 4.0], &[false, false], 1.0).unwrap(), 0.0);
        let losses = [1.0, 2.0, 6.0];
        let j = objective_j(&losses, &[true, true, true], 0.0).unwrap();
        assert!((j - 3.0).abs() < 1e-15);
        let j = objective_j(&[2.0, 5.0], &[true, false], 0.1).unwrap();
        assert!((j - 1.05).abs() < 1e-15);
        assert!(objective_j(&[1.0], &[true, false], 0.0).is_err());
    }

    #[test]
    fn baseline_and_oracle_never_probe() {
        for method in [Method::Baseline, Method::Oracle] {
            let mut st = SelectionState::new(method, 6, false);
            let c = cfg(2, 8, 0.4);
            for t in 0..8 {
                let sel = st.epoch(t, &c, &mut no_probe()).unwrap();
                assert_eq!(sel.kept, (0..6).collect::<Vec<_>>());
                assert!(sel.dropped.is_empty());
                assert!(!sel.probed);
                assert_eq!(sel.transform, LossTransform::Identity);
            }
            assert!(st.gamma().iter().all(|&g| g));
        }
    }

    #[test]
    fn step_e_keeps_everything_during_warmup() {
        let mut st = SelectionState::new(Method::StepE, 10, false);
        let c = cfg(3, 10, 0.4);
        for t in 0..3 {
            let sel = st.epoch(t, &c, &mut fixed(vec![1.0; 10])).unwrap();
            assert_eq!(sel.kept.len(), 10);
            assert!(sel.probed, "probe still runs during warm-up at t={t}");
        }
    }

    #[test]
    fn step_e_drops_highest_losses_on_schedule() {
        // Hand case: n=10, rho_max=0.4, final epoch drop = round(3.92) = 4.
        let losses = vec![9.0, 8.0, 7.0, 6.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let mut st = SelectionState::new(Method::StepE, 10, false);
        let c = cfg(10, 60, 0.4);
        let sel = st.epoch(59, &c, &mut fixed(losses)).unwrap();
        assert_eq!(sel.dropped, vec![0, 1, 2, 3]);
        assert_eq!(sel.kept.len(), 6);
        assert!((st.rho_t() - 0.4 * 49.0 / 50.0).abs() < 1e-15);
        let zeros = st.gamma().iter().filter(|&&g| !g).count();
        assert_eq!(zeros, 4);
    }

    #[test]
    fn step_e_readmits_by_default_but_not_with_permanent_drop() {
        let c = cfg(0, 10, 0.4);
        // Epoch 5 drops index 3; epoch 6 sees index 0 as worst instead.
        let first = vec![1.0, 1.0, 1.0, 9.0, 1.0];
        let second = vec![9.0, 1.0, 1.0, 0.5, 1.0];

        let mut fluid = SelectionState::new(Method::StepE, 5, false);
        fluid.epoch(5, &c, &mut fixed(first.clone())).unwrap();
        let sel = fluid.epoch(6, &c, &mut fixed(second.clone())).unwrap();
        // t=6: rho = 0.4*6/10 = 0.24, drop round(1.2) = 1.
        assert_eq!(sel.dropped, vec![0]);
        assert!(sel.kept.contains(&3), "index 3 readmitted");

        let mut fixed_drop = SelectionState::new(Method::StepE, 5, true);
        fixed_drop.epoch(5, &c, &mut fixed(first)).unwrap();
        let sel = fixed_drop.epoch(6, &c, &mut fixed(second)).unwrap();
        assert_eq!(sel.dropped, vec![3], "permanent drop keeps index 3 out");
    }

    #[test]
    fn step_e_permanent_drop_counts_track_schedule() {
        let c = cfg(2, 12, 0.5);
        let mut st = SelectionState::new(Method::StepE, 20, true);
        let mut last_dropped = 0;
        for t in 0..12 {
            let losses: Vec<f64> = (0..20).map(|i| ((i * 7 + t * 3) % 13) as f64).collect();
            let sel = st.epoch(t, &c, &mut fixed(losses)).unwrap();
            let expect = (rho_schedule(t, &c).unwrap() * 20.0).round() as usize;
            assert_eq!(sel.dropped.len(), expect);
            assert!(
                sel.dropped.len() >= last_dropped,
                "monotone under permanence"
            );
            last_dropped = sel.dropped.len();
        }
    }

    #[test]
    fn self_paced_ramps_and_finishes_full() {
        let c = cfg(2, 12, 0.45);
        let mut st = SelectionState::new(Method::SelfPaced, 8, false);
        let losses: Vec<f64> = (0..8).map(|i| i as f64).collect();

        let warm = st.epoch(1, &c, &mut fixed(losses.clone())).unwrap();
        assert_eq!(warm.kept.len(), 8);
        assert!(warm.probed);

        let start = st.epoch(2, &c, &mut fixed(losses.clone())).unwrap();
        assert_eq!(start.kept.len(), 4, "ramp starts at keep ratio 0.5");
        assert_eq!(start.kept, vec![0, 1, 2, 3]);

        let last = st.epoch(11, &c, &mut fixed(losses)).unwrap();
        assert_eq!(last.kept.len(), 8, "final epoch keeps everything");
        assert!(last.dropped.is_empty());
    }

    #[test]
    fn one_shot_drops_once_and_freezes() {
        let c = cfg(3, 10, 0.4);
        let mut st = SelectionState::new(Method::OneShot, 10, false);

        for t in 0..3 {
            let sel = st.epoch(t, &c, &mut no_probe()).unwrap();
            assert_eq!(sel.kept.len(), 10, "no-op before warm-up ends at t={t}");
            assert!(!sel.probed);
        }

        let losses = vec![0.0, 9.0, 0.0, 8.0, 0.0, 7.0, 0.0, 6.0, 0.0, 0.0];
        let sel = st.epoch(3, &c, &mut fixed(losses)).unwrap();
        assert_eq!(sel.dropped, vec![1, 3, 5, 7]);
        assert!(sel.probed);

        // Later epochs keep the frozen set even if losses change completely.
        let sel = st
            .epoch(
                4,
                &c,
                &mut fixed(vec![
                    100.0, 0.0, 100.0, 0.0, 100.0, 0.0, 100.0, 0.0, 0.0, 0.0,
                ]),
            )
            .unwrap();
        assert_eq!(sel.dropped, vec![1, 3, 5, 7]);
        assert!(!sel.probed);

        // The final epoch refreshes probe losses for metrics only.
        let sel = st.epoch(9, &c, &mut fixed(vec![0.5; 10])).unwrap();
        assert_eq!(sel.dropped, vec![1, 3, 5, 7]);
        assert!(sel.probed);
        assert_eq!(st.probe_losses(), &[0.5; 10]);
    }

    #[test]
    fn truncation_fits_tau_once_and_clips() {
        let c = cfg(2, 10, 0.4);
        let mut st = SelectionState::new(Method::Truncation, 5, false);

        let sel = st.epoch(0, &c, &mut no_probe()).unwrap();
        assert_eq!(sel.transform, LossTransform::Identity);

        // n=5, rho_max=0.4: drop 2, keep 3; tau = 3rd smallest loss = 3.0.
        let sel = st
            .epoch(1, &c, &mut fixed(vec![5.0, 1.0, 3.0, 2.0, 4.0]))
            .unwrap();
        assert!(sel.probed);
        assert_eq!(sel.transform, LossTransform::Truncate(3.0));
        assert_eq!(sel.kept.len(), 5, "truncation never gates");
        assert!(st.gamma().iter().all(|&g| g));

        // tau is frozen afterwards; no further probes.
        let sel = st.epoch(2, &c, &mut no_probe()).unwrap();
        assert_eq!(sel.transform, LossTransform::Truncate(3.0));
        assert!(!sel.probed);
        assert_eq!(st.tau(), Some(3.0));
    }

    #[test]
    fn probe_length_mismatch_is_an_error() {
        let mut st = SelectionState::new(Method::StepE, 5, false);
        let c = cfg(0, 4, 0.4);
        assert!(st.epoch(0, &c, &mut fixed(vec![1.0; 4])).is_err());
    }

    #[test]
    fn probe_nan_is_an_error() {
        let mut st = SelectionState::new(Method::StepE, 2, false);
        let c = cfg(0, 4, 0.4);
        assert!(st.epoch(0, &c, &mut fixed(vec![1.0, f64::NAN])).is_err());
    }

    #[test]
    fn kept_size_matches_exact_drop_count() {
        // Exercises the n - round(rho * n) convention at a rounding half-case.
        // All values are exactly representable: rho_max 0.5 halfway through
        // the ramp gives rho = 0.25, and 0.25 * 18 = 4.5 rounds away from
        // zero to 5 dropped, 13 kept.
        let mut st = SelectionState::new(Method::StepE, 18, false);
        let c = cfg(0, 2, 0.5);
        let losses: Vec<f64> = (0..18).map(|i| i as f64).collect();
        let sel = st.epoch(1, &c, &mut fixed(losses)).unwrap();
        assert_eq!(sel.kept.len(), 13);
        assert_eq!(sel.dropped, vec![13, 14, 15, 16, 17]);
    }
}
