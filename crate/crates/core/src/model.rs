//! Small softmax classifiers trained by minibatch SGD.
//!
//! Two architectures share one parameter layout: a bare softmax layer and a
//! one-hidden-layer ReLU MLP. Gradients are closed form, per-sample losses use
//! a numerically stable log-sum-exp, and the optimizer is SGD with Nesterov
//! momentum, additive L2 weight decay, and a cosine learning-rate schedule.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network shape. `Mlp` has one ReLU hidden layer of the given width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    SoftmaxLinear,
    Mlp { hidden: usize },
}

/// Optimizer hyperparameters for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr0: f64,
    /// Nesterov momentum coefficient.
    pub momentum: f64,
    /// Additive L2 term: the gradient of each parameter gains `weight_decay * theta`.
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 128,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::config("opt.lr0", "must be a positive finite real"));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::config("opt.momentum", "must lie in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("opt.weight_decay", "must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("opt.batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Cosine decay without restarts: `lr0 * 0.5 * (1 + cos(pi * t / t_total))`.
pub fn cosine_lr(t: usize, t_total: usize, lr0: f64) -> Result<f64> {
    if t >= t_total {
        return Err(Error::config(
            "schedule.t_total",
            format!("epoch index {t} is out of range for t_total={t_total}"),
        ));
    }
    if !(lr0.is_finite() && lr0 > 0.0) {
        return Err(Error::config("opt.lr0", "must be a positive finite real"));
    }
    Ok(lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / t_total as f64).cos()))
}

/// Model parameters plus momentum buffers.
///
/// Layer `i` maps an input of width `weights[i].ncols()` to
/// `weights[i].nrows()` outputs via `x W_i^T + b_i`.
#[derive(Debug, Clone)]
pub struct ModelState {
    arch: Arch,
    input_dim: usize,
    n_classes: usize,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    vel_w: Vec<Array2<f64>>,
    vel_b: Vec<Array1<f64>>,
}

/// Forward activations kept around for backprop.
struct Forward {
    /// Post-ReLU hidden activations; `None` for the linear model.
    hidden: Option<Array2<f64>>,
    logits: Array2<f64>,
}

/// Mean batch loss with per-layer weight and bias gradients.
type LayerGrads = (f64, Vec<Array2<f64>>, Vec<Array1<f64>>);

impl ModelState {
    /// Glorot-uniform weights from the given seed, zero biases and momentum.
    ///
    /// Weights are drawn layer by layer in row-major order, so a fixed seed
    /// yields bit-identical parameters on every call.
    pub fn init(arch: Arch, input_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if input_dim < 1 {
            return Err(Error::config("model.input_dim", "must be at least 1"));
        }
        if n_classes < 2 {
            return Err(Error::config("model.n_classes", "must be at least 2"));
        }
        let layer_dims: Vec<(usize, usize)> = match arch {
            Arch::SoftmaxLinear => vec![(n_classes, input_dim)],
            Arch::Mlp { hidden } => {
                if hidden < 1 {
                    return Err(Error::config("model.hidden", "must be at least 1"));
                }
                vec![(hidden, input_dim), (n_classes, hidden)]
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for &(out, inp) in &layer_dims {
            let limit = (6.0 / (inp + out) as f64).sqrt();
            let data: Vec<f64> = (0..out * inp)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            let w = Array2::from_shape_vec((out, inp), data)
                .expect("shape matches data length by construction");
            weights.push(w);
            biases.push(Array1::zeros(out));
        }
        let vel_w = weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let vel_b = biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        Ok(ModelState {
            arch,
            input_dim,
            n_classes,
            weights,
            biases,
            vel_w,
            vel_b,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened layer by layer (weights row-major, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    /// Overwrite parameters from a flat slice; momentum buffers are untouched.
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::data(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = params[offset];
                offset += 1;
            }
            for v in b.iter_mut() {
                *v = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    fn forward_full(&self, x: &ArrayView2<f64>) -> Result<Forward> {
        if x.ncols() != self.input_dim {
            return Err(Error::data(format!(
                "feature width {} does not match model input dim {}",
                x.ncols(),
                self.input_dim
            )));
        }
        match self.arch {
            Arch::SoftmaxLinear => {
                let logits = x.dot(&self.weights[0].t()) + &self.biases[0];
                Ok(Forward {
                    hidden: None,
                    logits,
                })
            }
            Arch::Mlp { .. } => {
                let mut hidden = x.dot(&self.weights[0].t()) + &self.biases[0];
                hidden.mapv_inplace(|v| v.max(0.0));
                let logits = hidden.dot(&self.weights[1].t()) + &self.biases[1];
                Ok(Forward {
                    hidden: Some(hidden),
                    logits,
                })
            }
        }
    }

    /// Raw class scores, one row per input row.
    pub fn forward_logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_full(&x.view())?.logits)
    }

    /// Cross-entropy losses of the rows of `x` selected by `indices`,
    /// evaluated against `labels`, aligned to `indices`.
    ///
    /// Losses are per-sample independent, so the returned values do not depend
    /// on how the evaluation is batched internally.
    pub fn per_sample_losses(
        &self,
        x: &Array2<f64>,
        labels: &[usize],
        indices: &[usize],
    ) -> Result<Vec<f64>> {
        self.check_batch_inputs(x, labels)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.nrows()) {
            return Err(Error::data(format!(
                "sample index {bad} out of range for {} rows",
                x.nrows()
            )));
        }
        // Fixed chunking keeps peak memory bounded and the output deterministic.
        const CHUNK: usize = 1024;
        let mut out = Vec::with_capacity(indices.len());
        for chunk in indices.chunks(CHUNK) {
            let xb = x.select(Axis(0), chunk);
            let fwd = self.forward_full(&xb.view())?;
            for (row, &i) in fwd.logits.axis_iter(Axis(0)).zip(chunk) {
                let z: Vec<f64> = row.iter().copied().collect();
                out.push(ce_loss_from_logits(&z, labels[i]));
            }
        }
        Ok(out)
    }

    /// Mean cross-entropy loss over all rows of `x` (no clipping, no decay).
    pub fn batch_loss(&self, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
        let idx: Vec<usize> = (0..x.nrows()).collect();
        let losses = self.per_sample_losses(x, labels, &idx)?;
        if losses.is_empty() {
            return Err(Error::data("empty batch"));
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Mean cross-entropy loss and its analytic gradient, flattened in
    /// `flat_params` order. Weight decay is not included.
    pub fn batch_grad(&self, x: &Array2<f64>, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        if x.nrows() == 0 {
            return Err(Error::data("empty batch"));
        }
        self.check_batch_inputs(x, labels)?;
        let (loss, gw, gb) = self.batch_grads(&x.view(), labels, None)?;
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in gw.iter().zip(&gb) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        Ok((loss, flat))
    }

    fn check_batch_inputs(&self, x: &Array2<f64>, labels: &[usize]) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::data(format!(
                "feature width {} does not match model input dim {}",
                x.ncols(),
                self.input_dim
            )));
        }
        if labels.len() != x.nrows() {
            return Err(Error::data(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::data(format!(
                "label {bad} out of range for {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Mean loss plus per-layer gradients for one batch.
    ///
    /// With `loss_clip = Some(tau)` the contribution of any sample whose loss
    /// exceeds `tau` is the constant `tau`: it adds `min(loss, tau)` to the
    /// mean and exactly zero to the gradient.
    fn batch_grads(
        &self,
        x: &ArrayView2<f64>,
        labels: &[usize],
        loss_clip: Option<f64>,
    ) -> Result<LayerGrads> {
        let b = x.nrows();
        let fwd = self.forward_full(x)?;

        let mut mean_loss = 0.0;
        // d(mean loss)/d(logits): softmax minus one-hot, scaled by 1/B,
        // with clipped rows zeroed.
        let mut dz = Array2::<f64>::zeros((b, self.n_classes));
        for (i, row) in fwd.logits.axis_iter(Axis(0)).enumerate() {
            let z: Vec<f64> = row.iter().copied().collect();
            let loss = ce_loss_from_logits(&z, labels[i]);
            let clipped = match loss_clip {
                Some(tau) if loss > tau => {
                    mean_loss += tau;
                    true
                }
                _ => {
                    mean_loss += loss;
                    false
                }
            };
            if !clipped {
                let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
                let denom: f64 = exp.iter().sum();
                for (k, &e) in exp.iter().enumerate() {
                    let p = e / denom;
                    dz[[i, k]] = (p - if k == labels[i] { 1.0 } else { 0.0 }) / b as f64;
                }
            }
        }
        mean_loss /= b as f64;

        let (gw, gb) = match self.arch {
            Arch::SoftmaxLinear => {
                let gw0 = dz.t().dot(x);
                let gb0 = dz.sum_axis(Axis(0));
                (vec![gw0], vec![gb0])
            }
            Arch::Mlp { .. } => {
                let hidden = fwd.hidden.as_ref().expect("MLP forward stores hidden");
                let gw1 = dz.t().dot(hidden);
                let gb1 = dz.sum_axis(Axis(0));
                let mut dh = dz.dot(&self.weights[1]);
                // ReLU derivative: zero wherever the activation was clamped.
                dh.zip_mut_with(hidden, |g, &h| {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                });
                let gw0 = dh.t().dot(x);
                let gb0 = dh.sum_axis(Axis(0));
                (vec![gw0, gw1], vec![gb0, gb1])
            }
        };
        Ok((mean_loss, gw, gb))
    }

    /// One SGD epoch over `kept`, shuffled by `seed` and split into batches of
    /// `opt.batch_size` (last batch may be short). Returns the mean (clipped)
    /// training loss over the kept set, each sample evaluated when its batch ran.
    ///
    /// Update per batch, Nesterov convention:
    /// `g = grad + weight_decay * theta; v = momentum * v + g;
    /// theta -= lr * (g + momentum * v)`.
    #[allow(clippy::too_many_arguments)]
    pub fn sgd_epoch(
        &mut self,
        x: &Array2<f64>,
        labels: &[usize],
        kept: &[usize],
        opt: &OptimizerConfig,
        lr: f64,
        seed: u64,
        loss_clip: Option<f64>,
    ) -> Result<f64> {
        opt.validate()?;
        self.check_batch_inputs(x, labels)?;
        if kept.is_empty() {
            return Err(Error::state("empty kept set"));
        }
        if let Some(&bad) = kept.iter().find(|&&i| i >= x.nrows()) {
            return Err(Error::data(format!(
                "kept index {bad} out of range for {} rows",
                x.nrows()
            )));
        }
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::config("opt.lr", "must be a nonnegative finite real"));
        }

        let mut order = kept.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let mu = opt.momentum;
        let wd = opt.weight_decay;
        let mut loss_sum = 0.0;
        for batch in order.chunks(opt.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, gw, gb) = self.batch_grads(&xb.view(), &yb, loss_clip)?;
            loss_sum += loss * batch.len() as f64;

            for layer in 0..self.weights.len() {
                let mut g = gw[layer].clone();
                g.zip_mut_with(&self.weights[layer], |gi, &p| *gi += wd * p);
                self.vel_w[layer].zip_mut_with(&g, |v, &gi| *v = mu * *v + gi);
                let vel = &self.vel_w[layer];
                self.weights[layer].zip_mut_with(&(g + vel * mu), |p, &step| *p -= lr * step);

                let mut gb_l = gb[layer].clone();
                gb_l.zip_mut_with(&self.biases[layer], |gi, &p| *gi += wd * p);
                self.vel_b[layer].zip_mut_with(&gb_l, |v, &gi| *v = mu * *v + gi);
                let vel_b = &self.vel_b[layer];
                self.biases[layer].zip_mut_with(&(gb_l + vel_b * mu), |p, &step| *p -= lr * step);
            }
            self.check_finite()?;
        }
        Ok(loss_sum / kept.len() as f64)
    }

    fn check_finite(&self) -> Result<()> {
        let finite = self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if finite {
            Ok(())
        } else {
            Err(Error::state(
                "non-finite parameter after update (training diverged)",
            ))
        }
    }
}

/// Stable cross-entropy from one row of logits: `logsumexp(z) - z[label]`.
fn ce_loss_from_logits(z: &[f64], label: usize) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_batch() -> (Array2<f64>, Vec<usize>) {
        let x = array![
            [0.5, -1.2, 0.3],
            [1.5, 0.2, -0.7],
            [-0.4, 0.9, 1.1],
            [0.0, 0.0, 2.0],
            [-1.0, -1.0, 0.5],
        ];
        (x, vec![0, 2, 1, 0, 2])
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = ModelState::init(Arch::SoftmaxLinear, 4, 3, 7).unwrap();
        assert_eq!(a.weights[0].dim(), (3, 4));
        assert_eq!(a.biases[0].len(), 3);
        assert!(a.biases[0].iter().all(|&v| v == 0.0));
        let b = ModelState::init(Arch::SoftmaxLinear, 4, 3, 7).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn init_mlp_shapes() {
        let m = ModelState::init(Arch::Mlp { hidden: 16 }, 8, 5, 1).unwrap();
        assert_eq!(m.weights[0].dim(), (16, 8));
        assert_eq!(m.weights[1].dim(), (5, 16));
        assert_eq!(m.biases[0].len(), 16);
        assert_eq!(m.biases[1].len(), 5);
        assert_eq!(m.param_count(), 16 * 8 + 16 + 5 * 16 + 5);
    }

    #[test]
    fn init_seeds_differ() {
        let a = ModelState::init(Arch::Mlp { hidden: 4 }, 3, 2, 1).unwrap();
        let b = ModelState::init(Arch::Mlp { hidden: 4 }, 3, 2, 2).unwrap();
        assert_ne!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(ModelState::init(Arch::SoftmaxLinear, 0, 3, 1).is_err());
        assert!(ModelState::init(Arch::SoftmaxLinear, 4, 1, 1).is_err());
        assert!(ModelState::init(Arch::Mlp { hidden: 0 }, 4, 3, 1).is_err());
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 2, 2, 0).unwrap();
        m.set_flat_params(&vec![0.0; m.param_count()]).unwrap();
        let x = array![[3.0, -4.0], [1.0, 2.0]];
        let z = m.forward_logits(&x).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_weights_pass_features_through() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 2, 2, 0).unwrap();
        // W = I, b = 0: logits equal the features.
        m.set_flat_params(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let z = m.forward_logits(&array![[1.0, 0.0]]).unwrap();
        assert_eq!(z, array![[1.0, 0.0]]);
    }

    #[test]
    fn mlp_zero_output_layer_gives_zero_logits() {
        let mut m = ModelState::init(Arch::Mlp { hidden: 3 }, 2, 2, 9).unwrap();
        let mut p = m.flat_params();
        // Zero the second layer (weights and bias), keep the first random.
        for v in p.iter_mut().skip(3 * 2 + 3) {
            *v = 0.0;
        }
        m.set_flat_params(&p).unwrap();
        let z = m.forward_logits(&array![[0.7, -0.3], [5.0, 5.0]]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let m = ModelState::init(Arch::SoftmaxLinear, 3, 2, 0).unwrap();
        assert!(m.forward_logits(&array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 4, 10, 3).unwrap();
        m.set_flat_params(&vec![0.0; m.param_count()]).unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| (i * 4 + j) as f64 * 0.1);
        let labels = vec![0, 9, 3, 5, 2, 7];
        let idx: Vec<usize> = (0..6).collect();
        let losses = m.per_sample_losses(&x, &labels, &idx).unwrap();
        for l in losses {
            assert!((l - 10f64.ln()).abs() < 1e-12, "loss {l}");
        }
    }

    #[test]
    fn saturated_logit_loss_vanishes() {
        let loss = ce_loss_from_logits(&[50.0, 0.0, 0.0], 0);
        assert!(loss >= 0.0);
        assert!(loss < 1e-20, "loss {loss}");
    }

    #[test]
    fn losses_match_scalar_oracle() {
        let m = ModelState::init(Arch::Mlp { hidden: 6 }, 3, 4, 11).unwrap();
        let (x, labels) = toy_batch();
        let idx: Vec<usize> = (0..x.nrows()).collect();
        let losses = m.per_sample_losses(&x, &labels, &idx).unwrap();

        // Scalar re-implementation, one sample at a time, plain loops.
        let p = m.flat_params();
        let (h, d, k) = (6, 3, 4);
        let w1 = &p[0..h * d];
        let b1 = &p[h * d..h * d + h];
        let w2 = &p[h * d + h..h * d + h + k * h];
        let b2 = &p[h * d + h + k * h..];
        for (i, &want) in idx.iter().zip(&losses) {
            let mut hid = vec![0.0; h];
            for j in 0..h {
                let mut s = b1[j];
                for c in 0..d {
                    s += w1[j * d + c] * x[[*i, c]];
                }
                hid[j] = s.max(0.0);
            }
            let mut z = vec![0.0; k];
            for j in 0..k {
                let mut s = b2[j];
                for c in 0..h {
                    s += w2[j * h + c] * hid[c];
                }
                z[j] = s;
            }
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
            let got = lse - z[labels[*i]];
            assert!((got - want).abs() < 1e-12, "sample {i}: {got} vs {want}");
        }
    }

    #[test]
    fn empty_index_set_gives_empty_losses() {
        let m = ModelState::init(Arch::SoftmaxLinear, 3, 4, 11).unwrap();
        let (x, labels) = toy_batch();
        assert!(m.per_sample_losses(&x, &labels, &[]).unwrap().is_empty());
    }

    #[test]
    fn losses_reject_out_of_range_index() {
        let m = ModelState::init(Arch::SoftmaxLinear, 3, 4, 11).unwrap();
        let (x, labels) = toy_batch();
        assert!(m.per_sample_losses(&x, &labels, &[5]).is_err());
    }

    fn finite_diff_grad(
        model: &mut ModelState,
        x: &Array2<f64>,
        labels: &[usize],
        eps: f64,
    ) -> Vec<f64> {
        let base = model.flat_params();
        let mut grad = vec![0.0; base.len()];
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + eps;
            model.set_flat_params(&p).unwrap();
            let up = model.batch_loss(x, labels).unwrap();
            p[i] = base[i] - eps;
            model.set_flat_params(&p).unwrap();
            let down = model.batch_loss(x, labels).unwrap();
            grad[i] = (up - down) / (2.0 * eps);
        }
        model.set_flat_params(&base).unwrap();
        grad
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // Softmax regression, 12 parameters, single batch.
        let mut m = ModelState::init(Arch::SoftmaxLinear, 3, 3, 5).unwrap();
        let (x, labels) = toy_batch();
        let (_, analytic) = m.batch_grad(&x, &labels).unwrap();
        let numeric = finite_diff_grad(&mut m, &x, &labels, 1e-4);
        let num_norm: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff_norm: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        assert!(
            diff_norm <= 1e-5 * num_norm.max(1e-8),
            "relative error {}",
            diff_norm / num_norm
        );
    }

    #[test]
    fn loss_clip_zeroes_gradient_of_clipped_samples() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 2, 2, 2).unwrap();
        // Confident wrong prediction for sample 1 makes its loss large.
        m.set_flat_params(&[2.0, 0.0, -2.0, 0.0, 0.0, 0.0]).unwrap();
        let x = array![[0.1, 0.0], [3.0, 0.0]];
        let labels = vec![0, 1];
        let tau = 1.0;

        let losses = m.per_sample_losses(&x, &labels, &[0, 1]).unwrap();
        assert!(losses[0] < tau && losses[1] > tau);

        let (mean, gw, gb) = m.batch_grads(&x.view(), &labels, Some(tau)).unwrap();
        assert!((mean - (losses[0] + tau) / 2.0).abs() < 1e-12);

        // The clipped batch gradient equals half the gradient of sample 0 alone.
        let solo = x.select(Axis(0), &[0]);
        let (_, gw_solo, gb_solo) = m.batch_grads(&solo.view(), &labels[..1], None).unwrap();
        for (a, b) in gw[0].iter().zip(gw_solo[0].iter()) {
            assert!((a - b / 2.0).abs() < 1e-12);
        }
        for (a, b) in gb[0].iter().zip(gb_solo[0].iter()) {
            assert!((a - b / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_lr_keeps_parameters_but_moves_momentum() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 3, 4, 1).unwrap();
        let before = m.flat_params();
        let (x, labels) = toy_batch();
        let kept: Vec<usize> = (0..x.nrows()).collect();
        let opt = OptimizerConfig {
            batch_size: 2,
            ..OptimizerConfig::default()
        };
        m.sgd_epoch(&x, &labels, &kept, &opt, 0.0, 9, None).unwrap();
        assert_eq!(m.flat_params(), before);
        assert!(m.vel_w[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn sgd_epoch_rejects_empty_kept_set() {
        let mut m = ModelState::init(Arch::SoftmaxLinear, 3, 4, 1).unwrap();
        let (x, labels) = toy_batch();
        let err = m
            .sgd_epoch(&x, &labels, &[], &OptimizerConfig::default(), 0.1, 0, None)
            .unwrap_err();
        assert!(err.to_string().contains("empty kept set"));
    }

    #[test]
    fn sgd_epoch_matches_reference_loop() {
        // Training with kept = all indices must equal a plain loop that has no
        // selection machinery at all, parameter for parameter.
        let (x, labels) = toy_batch();
        let opt = OptimizerConfig {
            batch_size: 2,
            ..OptimizerConfig::default()
        };
        let kept: Vec<usize> = (0..x.nrows()).collect();

        let mut gated = ModelState::init(Arch::Mlp { hidden: 4 }, 3, 4, 17).unwrap();
        for epoch in 0..3 {
            gated
                .sgd_epoch(&x, &labels, &kept, &opt, 0.05, 100 + epoch, None)
                .unwrap();
        }

        let mut plain = ModelState::init(Arch::Mlp { hidden: 4 }, 3, 4, 17).unwrap();
        let mut vel = vec![0.0; plain.param_count()];
        for epoch in 0..3 {
            let mut order: Vec<usize> = (0..x.nrows()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(100 + epoch));
            for batch in order.chunks(opt.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                let (_, grad) = plain.batch_grad(&xb, &yb).unwrap();
                let mut p = plain.flat_params();
                for i in 0..p.len() {
                    let g = grad[i] + opt.weight_decay * p[i];
                    vel[i] = opt.momentum * vel[i] + g;
                    p[i] -= 0.05 * (g + opt.momentum * vel[i]);
                }
                plain.set_flat_params(&p).unwrap();
            }
        }

        let a = gated.flat_params();
        let b = plain.flat_params();
        for (i, (ga, pb)) in a.iter().zip(&b).enumerate() {
            assert!(
                (ga - pb).abs() <= 1e-12 * pb.abs().max(1.0),
                "param {i}: {ga} vs {pb}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, labels) = toy_batch();
        let kept: Vec<usize> = (0..x.nrows()).collect();
        let opt = OptimizerConfig {
            batch_size: 2,
            ..OptimizerConfig::default()
        };
        let run = || {
            let mut m = ModelState::init(Arch::Mlp { hidden: 5 }, 3, 4, 23).unwrap();
            for epoch in 0..4 {
                m.sgd_epoch(&x, &labels, &kept, &opt, 0.05, 7 + epoch, None)
                    .unwrap();
            }
            m.flat_params()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn cosine_schedule_values() {
        assert_eq!(cosine_lr(0, 60, 0.1).unwrap(), 0.1);
        assert!((cosine_lr(30, 60, 0.1).unwrap() - 0.05).abs() < 1e-15);
        // Independently computed value of 0.1 * 0.5 * (1 + cos(59 pi / 60)).
        let last = cosine_lr(59, 60, 0.1).unwrap();
        assert!((last - 6.852326227130834e-5).abs() < 1e-15, "{last}");
        let lrs: Vec<f64> = (0..60).map(|t| cosine_lr(t, 60, 0.1).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cosine_rejects_out_of_range_epoch() {
        assert!(matches!(cosine_lr(60, 60, 0.1), Err(Error::Config { .. })));
    }
}
