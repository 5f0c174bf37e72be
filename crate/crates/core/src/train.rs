//! Minibatch optimization: SGD with momentum, Adam, and cosine-annealed
//! learning rates. Batch order is a pure function of `(seed, epoch)`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{backward_prevalidated, Gate, Gradients};
use crate::error::{Error, Result};
use crate::mask::ReluMask;
use crate::net::NetworkSpec;
use crate::params::{LayerParams, Parameters};
use crate::rng::{shuffle, substream};
use crate::scalar::Scalar;
use crate::snl::SoftMask;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Sgd { momentum: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub lr_max: f64,
    #[serde(default)]
    pub lr_min: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_max < self.lr_min || self.lr_min < 0.0 {
            return Err(Error::Config(format!(
                "need lr_max >= lr_min >= 0, got {} and {}",
                self.lr_max, self.lr_min
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::default(),
            lr_max: 1e-3,
            lr_min: 0.0,
            epochs: 20,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Cosine-annealed learning rate:
/// `lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi t / T))`.
pub fn cosine_lr(step: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    assert!(total >= 1, "cosine schedule needs total >= 1");
    let t = step.min(total) as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t / total as f64).cos())
}

/// Optimizer slots for one tensor's worth of parameters.
struct Slot<S> {
    m: Vec<S>,
    v: Vec<S>,
}

/// Optimizer state aligned with the parameter tensors (and optionally the
/// soft mask). Fresh per training call, so each finetune owns its horizon.
pub(crate) struct OptState<S> {
    kind: OptimizerKind,
    weights: Vec<Slot<S>>,
    biases: Vec<Slot<S>>,
    alpha: Vec<Slot<S>>,
    step: usize,
}

impl<S: Scalar> OptState<S> {
    pub(crate) fn new(kind: OptimizerKind, params: &Parameters<S>, alpha_sites: &[usize]) -> Self {
        let mk = |n: usize| Slot {
            m: vec![S::ZERO; n],
            v: vec![S::ZERO; n],
        };
        Self {
            kind,
            weights: params.iter().map(|(_, p)| mk(p.weight.len())).collect(),
            biases: params.iter().map(|(_, p)| mk(p.bias.len())).collect(),
            alpha: alpha_sites.iter().map(|&n| mk(n)).collect(),
            step: 0,
        }
    }

    fn update(
        kind: OptimizerKind,
        step: usize,
        lr: f64,
        slot: &mut Slot<S>,
        data: &mut [S],
        grad: &[S],
    ) {
        match kind {
            OptimizerKind::Sgd { momentum } => {
                let mu = S::from_f64(momentum);
                let lr = S::from_f64(lr);
                for ((w, g), m) in data.iter_mut().zip(grad).zip(slot.m.iter_mut()) {
                    *m = mu * *m + *g;
                    *w -= lr * *m;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let b1 = S::from_f64(beta1);
                let b2 = S::from_f64(beta2);
                let eps = S::from_f64(eps);
                let t = step as i32;
                let corr1 = S::from_f64(1.0 - beta1.powi(t));
                let corr2 = S::from_f64(1.0 - beta2.powi(t));
                let lr = S::from_f64(lr);
                for ((w, g), (m, v)) in data
                    .iter_mut()
                    .zip(grad)
                    .zip(slot.m.iter_mut().zip(slot.v.iter_mut()))
                {
                    *m = b1 * *m + (S::ONE - b1) * *g;
                    *v = b2 * *v + (S::ONE - b2) * *g * *g;
                    let m_hat = *m / corr1;
                    let v_hat = *v / corr2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }

    /// Apply one optimizer step over parameters (and soft mask, when given).
    pub(crate) fn apply(
        &mut self,
        lr: f64,
        params: &mut Parameters<S>,
        grads: &Gradients<S>,
        alpha: Option<&mut SoftMask<S>>,
    ) {
        self.step += 1;
        for (i, (idx, p)) in params.iter_mut().enumerate() {
            let g: &LayerParams<S> = &grads.layers[idx];
            Self::update(
                self.kind,
                self.step,
                lr,
                &mut self.weights[i],
                p.weight.data_mut(),
                g.weight.data(),
            );
            Self::update(
                self.kind,
                self.step,
                lr,
                &mut self.biases[i],
                p.bias.data_mut(),
                g.bias.data(),
            );
        }
        if let (Some(soft), Some(ga)) = (alpha, grads.alpha.as_ref()) {
            for (i, (layer, g)) in soft.layers_mut().iter_mut().zip(ga.iter()).enumerate() {
                Self::update(self.kind, self.step, lr, &mut self.alpha[i], layer, g);
            }
            soft.clamp_unit();
        }
    }
}

/// Deterministic sample order for one epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, "epoch-order", &[epoch as u64]);
    shuffle(&mut rng, &mut idx);
    idx
}

/// Mean gradient over one batch. Sequential accumulation keeps runs bitwise
/// reproducible. Gate shape must have been validated by the caller.
fn batch_gradient<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    dataset: &Dataset<S>,
    batch: &[usize],
    want_alpha: bool,
) -> Result<Gradients<S>> {
    let mut total: Option<Gradients<S>> = None;
    for &i in batch {
        let x: Tensor<S> = dataset.sample(i);
        let (_, g) = backward_prevalidated(spec, params, gate, &x, dataset.labels[i], want_alpha)?;
        match total.as_mut() {
            None => total = Some(g),
            Some(t) => t.accumulate(&g),
        }
    }
    let mut total = total.expect("non-empty batch");
    total.scale(S::from_f64(1.0 / batch.len() as f64));
    Ok(total)
}

/// Minibatch-train the parameters under a fixed binary mask. The cosine
/// schedule spans this call's full horizon (`epochs * batches`).
pub fn finetune<S: Scalar>(
    spec: &NetworkSpec,
    params: &mut Parameters<S>,
    mask: &ReluMask,
    dataset: &Dataset<S>,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok(());
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.lr_max == 0.0 {
        return Ok(());
    }
    crate::engine::validate_gate::<S>(spec, &Gate::Binary(mask), dataset.sample_shape())?;
    let batches_per_epoch = dataset.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut opt = OptState::new(cfg.optimizer, params, &[]);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(dataset.len(), cfg.seed, epoch);
        for batch in order.chunks(cfg.batch_size) {
            let grads = batch_gradient(spec, params, &Gate::Binary(mask), dataset, batch, false)?;
            let lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
            opt.apply(lr, params, &grads, None);
            step += 1;
        }
    }
    Ok(())
}

/// One epoch of joint theta/alpha optimization on the relaxed objective; the
/// L1 pressure enters through `lambda` (alpha is clamped to [0, 1] after
/// every step, so d|a|/da = 1).
///
/// When `stop_budget` is `(threshold, target)`, the thresholded budget is
/// checked after every step and the epoch ends as soon as it reaches the
/// target; returns whether that happened. Without the mid-epoch check a
/// single epoch can blow far through the target once the multiplier ramps
/// up.
#[allow(clippy::too_many_arguments)]
pub(crate) fn soft_epoch<S: Scalar>(
    spec: &NetworkSpec,
    params: &mut Parameters<S>,
    alpha: &mut SoftMask<S>,
    dataset: &Dataset<S>,
    lambda: f64,
    lr: f64,
    batch_size: usize,
    opt: &mut OptState<S>,
    seed: u64,
    epoch: usize,
    stop_budget: Option<(f64, usize)>,
) -> Result<bool> {
    crate::engine::validate_gate(spec, &Gate::Soft(&*alpha), dataset.sample_shape())?;
    let order = epoch_order(dataset.len(), seed, epoch);
    for batch in order.chunks(batch_size) {
        let gate = Gate::Soft(&*alpha);
        let mut grads = batch_gradient(spec, params, &gate, dataset, batch, true)?;
        if let Some(ga) = grads.alpha.as_mut() {
            let l = S::from_f64(lambda);
            for layer in ga.iter_mut() {
                for g in layer.iter_mut() {
                    *g += l;
                }
            }
        }
        opt.apply(lr, params, &grads, Some(alpha));
        if let Some((threshold, target)) = stop_budget {
            if alpha.effective_budget(threshold) <= target {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
