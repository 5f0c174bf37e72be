//! The LASSO-relaxed selective baseline and its mask-dynamics tooling.
//!
//! Instead of the hard L0 constraint, a per-site value `alpha` in [0, 1]
//! interpolates between ReLU and identity and is trained jointly with the
//! weights under `CE + lambda * sum(alpha)`. When the thresholded budget
//! stalls, the multiplier grows by `kappa`. At the end the mask is hard
//! thresholded (which costs accuracy) and the weights are finetuned under the
//! binary mask.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{evaluate_accuracy, evaluate_soft_accuracy, loss_ce, soft_forward, Gate};
use crate::error::{Error, Result};
use crate::mask::ReluMask;
use crate::net::{mask_layout, NetworkSpec};
use crate::params::Parameters;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::{finetune, OptState, TrainConfig};

/// Per-site continuous gate values, clamped to [0, 1] after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask<S> {
    layers: Vec<Vec<S>>,
    layer_indices: Vec<usize>,
}

impl<S: Scalar> SoftMask<S> {
    /// All-ones soft mask matching the architecture's maskable layout.
    pub fn ones(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Self> {
        let layout = mask_layout(spec, input_shape)?;
        Ok(Self {
            layers: layout.sites.iter().map(|&(_, n)| vec![S::ONE; n]).collect(),
            layer_indices: layout.sites.iter().map(|&(i, _)| i).collect(),
        })
    }

    pub fn constant(spec: &NetworkSpec, input_shape: &[usize], value: f64) -> Result<Self> {
        let mut m = Self::ones(spec, input_shape)?;
        let v = S::from_f64(value);
        for layer in m.layers.iter_mut() {
            for a in layer.iter_mut() {
                *a = v;
            }
        }
        Ok(m)
    }

    pub fn from_values(layer_indices: Vec<usize>, layers: Vec<Vec<S>>) -> Self {
        Self {
            layers,
            layer_indices,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sites(&self, layer: usize) -> usize {
        self.layers[layer].len()
    }

    #[inline]
    pub fn get(&self, layer: usize, site: usize) -> S {
        self.layers[layer][site]
    }

    pub fn layers(&self) -> &[Vec<S>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<Vec<S>> {
        &mut self.layers
    }

    pub fn total_sites(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Sum of |alpha|; alpha is kept non-negative, so this is plain sum.
    pub fn l1(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .map(|a| a.to_f64().abs())
            .sum()
    }

    pub(crate) fn clamp_unit(&mut self) {
        for layer in self.layers.iter_mut() {
            for a in layer.iter_mut() {
                if *a < S::ZERO {
                    *a = S::ZERO;
                } else if *a > S::ONE {
                    *a = S::ONE;
                }
            }
        }
    }

    /// Count of sites with `alpha > threshold` (strict).
    pub fn effective_budget(&self, threshold: f64) -> usize {
        let t = S::from_f64(threshold);
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .filter(|a| **a > t)
            .count()
    }

    /// Hard-threshold into a binary mask (`alpha > threshold`).
    pub fn binarize(&self, threshold: f64) -> ReluMask {
        let t = S::from_f64(threshold);
        let bits: Vec<(usize, Vec<bool>)> = self
            .layer_indices
            .iter()
            .zip(&self.layers)
            .map(|(&idx, l)| (idx, l.iter().map(|a| *a > t).collect()))
            .collect();
        ReluMask::from_bits(&bits)
    }
}

/// Relaxed objective: `CE(soft_forward(x), y) + lambda * ||alpha||_1`.
pub fn snl_loss<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    alpha: &SoftMask<S>,
    x: &Tensor<S>,
    label: usize,
    lambda: f64,
) -> Result<S> {
    let logits = soft_forward(spec, params, alpha, x)?;
    Ok(loss_ce(&logits, label)? + S::from_f64(lambda * alpha.l1()))
}

/// Hysteresis indicator update. An on bit survives while the
/// score stays above `-t_h`; an off bit turns on only once the score exceeds
/// `+t_h`. Inside the band |score| <= t_h the state is preserved.
pub fn hysteresis_update(current: bool, score: f64, t_h: f64) -> bool {
    if current {
        score > -t_h
    } else {
        score > t_h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnlConfig {
    pub lambda0: f64,
    pub kappa: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub epochs: usize,
    #[serde(default = "default_interval")]
    pub budget_check_interval: usize,
    /// Minimum budget decrease per check interval before lambda grows;
    /// `None` means 1% of the current budget.
    #[serde(default)]
    pub stall_min_decrease: Option<usize>,
    pub b_target: usize,
    pub train: TrainConfig,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_interval() -> usize {
    5
}

impl SnlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda0 <= 0.0 {
            return Err(Error::Config("lambda0 must be positive".into()));
        }
        if self.kappa <= 1.0 {
            return Err(Error::Config("kappa must exceed 1".into()));
        }
        if !(0.0 < self.threshold && self.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        if self.budget_check_interval == 0 {
            return Err(Error::Config("budget_check_interval must be >= 1".into()));
        }
        self.train.validate()
    }
}

/// Snapshot of the binarized mask along the run.
#[derive(Debug, Clone)]
pub struct MaskCheckpoint {
    pub epoch: usize,
    pub mask: ReluMask,
    pub budget: usize,
    pub train_accuracy: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SnlResult<S> {
    pub params: Parameters<S>,
    pub mask: ReluMask,
    pub checkpoints: Vec<MaskCheckpoint>,
    pub target_reached: bool,
    pub epochs_run: usize,
    pub final_lambda: f64,
    /// Soft-gate accuracy right before thresholding.
    pub acc_before_binarize: f64,
    /// Binary-mask accuracy right after thresholding, before finetune.
    pub acc_after_binarize: f64,
    /// Accuracy after the post-threshold finetune.
    pub acc_after_finetune: f64,
}

/// Joint theta/alpha descent until the thresholded budget reaches the
/// target (or epochs run out), then hard-threshold and finetune.
///
/// Checkpoints are recorded every epoch. Budgets along the way are not
/// monotone once the multiplier updates kick in; only the final budget is
/// compared against the target.
pub fn snl_run<S: Scalar>(
    spec: &NetworkSpec,
    theta0: &Parameters<S>,
    dataset: &Dataset<S>,
    input_shape: &[usize],
    cfg: &SnlConfig,
) -> Result<SnlResult<S>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = theta0.clone();
    let mut alpha = SoftMask::<S>::ones(spec, input_shape)?;
    let mut lambda = cfg.lambda0;
    let mut checkpoints = Vec::new();
    let mut budget_at_last_check = alpha.effective_budget(cfg.threshold);

    let alpha_sites: Vec<usize> = (0..alpha.layer_count())
        .map(|i| alpha.layer_sites(i))
        .collect();
    let mut opt = OptState::new(cfg.train.optimizer, &params, &alpha_sites);

    let mut epochs_run = 0usize;
    let mut target_reached = alpha.effective_budget(cfg.threshold) <= cfg.b_target;

    for epoch in 0..cfg.epochs {
        if target_reached {
            break;
        }
        let lr =
            crate::train::cosine_lr(epoch, cfg.epochs.max(1), cfg.train.lr_max, cfg.train.lr_min);
        crate::train::soft_epoch(
            spec,
            &mut params,
            &mut alpha,
            dataset,
            lambda,
            lr,
            cfg.train.batch_size,
            &mut opt,
            cfg.train.seed,
            epoch,
            Some((cfg.threshold, cfg.b_target)),
        )?;
        epochs_run = epoch + 1;

        let budget = alpha.effective_budget(cfg.threshold);
        let mask = alpha.binarize(cfg.threshold);
        let train_accuracy = evaluate_accuracy(spec, &params, &mask, dataset)?;
        checkpoints.push(MaskCheckpoint {
            epoch: epochs_run,
            mask,
            budget,
            train_accuracy,
            lambda,
        });

        if budget <= cfg.b_target {
            target_reached = true;
            break;
        }

        if epochs_run.is_multiple_of(cfg.budget_check_interval) {
            let min_decrease = cfg
                .stall_min_decrease
                .unwrap_or_else(|| ((budget as f64) * 0.01).ceil().max(1.0) as usize);
            let decreased = budget_at_last_check.saturating_sub(budget);
            if decreased < min_decrease {
                lambda *= cfg.kappa;
            }
            budget_at_last_check = budget;
        }
    }

    let acc_before_binarize = evaluate_soft_accuracy(spec, &params, &alpha, dataset)?;
    let mask = alpha.binarize(cfg.threshold);
    let acc_after_binarize = evaluate_accuracy(spec, &params, &mask, dataset)?;
    finetune(spec, &mut params, &mask, dataset, &cfg.train)?;
    let acc_after_finetune = evaluate_accuracy(spec, &params, &mask, dataset)?;

    Ok(SnlResult {
        params,
        mask,
        checkpoints,
        target_reached,
        epochs_run,
        final_lambda: lambda,
        acc_before_binarize,
        acc_after_binarize,
        acc_after_finetune,
    })
}

/// Pairwise IoU over mask checkpoints: each entry divides the intersection
/// by the smaller-budget mask's L0.
pub fn iou_matrix(checkpoints: &[&ReluMask]) -> Result<Vec<Vec<f64>>> {
    if checkpoints.is_empty() {
        return Err(Error::Mask(
            "iou matrix needs at least one checkpoint".into(),
        ));
    }
    let n = checkpoints.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (small, big) = if checkpoints[i].l0() <= checkpoints[j].l0() {
                (checkpoints[i], checkpoints[j])
            } else {
                (checkpoints[j], checkpoints[i])
            };
            m[i][j] = small.iou(big)?;
        }
    }
    Ok(m)
}

/// Per-site trainable indicator scores driving the hysteresis update mode.
/// Scores descend the CE gradient through the soft gate; the hysteresis band
/// keeps bits from flapping when scores hover near zero.
#[derive(Debug, Clone)]
pub struct HysteresisState<S> {
    pub scores: Vec<Vec<f64>>,
    pub mask: ReluMask,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> HysteresisState<S> {
    pub fn new(spec: &NetworkSpec, input_shape: &[usize], initial_score: f64) -> Result<Self> {
        let layout = mask_layout(spec, input_shape)?;
        let scores: Vec<Vec<f64>> = layout
            .sites
            .iter()
            .map(|&(_, n)| vec![initial_score; n])
            .collect();
        let bits: Vec<(usize, Vec<bool>)> = layout
            .sites
            .iter()
            .map(|&(i, n)| (i, vec![initial_score > 0.0; n]))
            .collect();
        Ok(Self {
            scores,
            mask: ReluMask::from_bits(&bits),
            _marker: std::marker::PhantomData,
        })
    }

    /// One epoch of score descent followed by the hysteresis re-threshold.
    pub fn epoch_update(
        &mut self,
        spec: &NetworkSpec,
        params: &Parameters<S>,
        dataset: &Dataset<S>,
        lr: f64,
        t_h: f64,
    ) -> Result<()> {
        // Evaluate CE gradients w.r.t. alpha at the current binary mask
        // treated as a soft mask.
        let alpha_layers: Vec<Vec<S>> = (0..self.mask.layer_count())
            .map(|li| {
                (0..self.mask.layer_sites(li))
                    .map(|s| {
                        if self.mask.get(li, s) {
                            S::ONE
                        } else {
                            S::ZERO
                        }
                    })
                    .collect()
            })
            .collect();
        let layer_indices: Vec<usize> = (0..self.mask.layer_count())
            .map(|li| self.mask.layer_index(li))
            .collect();
        let alpha = SoftMask::from_values(layer_indices.clone(), alpha_layers);

        let mut grad_sum: Vec<Vec<f64>> = self.scores.iter().map(|l| vec![0.0; l.len()]).collect();
        for i in 0..dataset.len() {
            let x = dataset.sample(i);
            let (_, g) = crate::engine::backward(
                spec,
                params,
                &Gate::Soft(&alpha),
                &x,
                dataset.labels[i],
                true,
            )?;
            if let Some(ga) = g.alpha {
                for (acc, layer) in grad_sum.iter_mut().zip(ga.iter()) {
                    for (a, v) in acc.iter_mut().zip(layer.iter()) {
                        *a += v.to_f64();
                    }
                }
            }
        }
        let scale = 1.0 / dataset.len() as f64;

        let mut bits: Vec<(usize, Vec<bool>)> = Vec::with_capacity(self.scores.len());
        for (li, layer_scores) in self.scores.iter_mut().enumerate() {
            let mut layer_bits = Vec::with_capacity(layer_scores.len());
            for (site, score) in layer_scores.iter_mut().enumerate() {
                *score -= lr * grad_sum[li][site] * scale;
                let current = self.mask.get(li, site);
                layer_bits.push(hysteresis_update(current, *score, t_h));
            }
            bits.push((layer_indices[li], layer_bits));
        }
        self.mask = ReluMask::from_bits(&bits);
        Ok(())
    }
}
