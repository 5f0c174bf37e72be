//! Block coordinate descent over the binary ReLU mask.
//!
//! Each iteration samples up to `rt` removal hypotheses of `drc` sites each,
//! measures every hypothesis's train-accuracy drop against the iteration's
//! baseline, accepts the first one that drops less than `adt_percent` (or the
//! argmin over all trials), clears those bits for good, and finetunes. Sites
//! are never revisited, so successive masks form a strict subset chain and
//! the final budget is hit exactly.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::evaluate_accuracy;
use crate::error::{Error, Result};
use crate::mask::{ReluMask, RemovalSet};
use crate::net::NetworkSpec;
use crate::params::Parameters;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::train::{finetune, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcdConfig {
    /// Delta ReLU Count: sites removed per iteration.
    pub drc: usize,
    /// Accuracy Degradation Tolerance in percentage points; the first trial
    /// dropping strictly less than this is accepted immediately.
    pub adt_percent: f64,
    /// Max random trials per iteration before falling back to the argmin.
    pub rt: usize,
    pub b_target: usize,
    pub finetune: TrainConfig,
    /// Evaluate trials on a fixed seed-deterministic subset of this size;
    /// `None` means the full training set.
    #[serde(default)]
    pub eval_subset_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Trial evaluations per wave; higher values run waves in parallel.
    /// The chosen removals are identical for any thread count.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.drc == 0 {
            return Err(Error::Config("drc must be >= 1".into()));
        }
        if self.rt == 0 {
            return Err(Error::Config("rt must be >= 1".into()));
        }
        if !self.adt_percent.is_finite() {
            // Negative tolerances are legal: drops never go below -100, so
            // anything <= -100 forces a full argmin scan.
            return Err(Error::Config("adt_percent must be finite".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        self.finetune.validate()
    }

    /// Reference defaults: DRC 100, ADT 0.3%, 50 trials, 20-epoch SGD
    /// finetune at 1e-3 with cosine annealing.
    pub fn defaults_for(b_target: usize) -> Self {
        Self {
            drc: 100,
            adt_percent: 0.3,
            rt: 50,
            b_target,
            finetune: TrainConfig::default(),
            eval_subset_size: None,
            seed: 0,
            threads: 1,
        }
    }
}

/// One evaluated removal hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub removal: RemovalSet,
    /// Baseline accuracy minus hypothesis accuracy, both on the same
    /// evaluation set.
    pub delta_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    pub budget_before: usize,
    pub budget_after: usize,
    pub trials_executed: usize,
    pub chosen_trial: usize,
    pub chosen_delta_acc: f64,
    pub baseline_acc: f64,
    pub acc_before_finetune: f64,
    pub acc_after_finetune: f64,
}

/// Audit trail of a reduction run: one record and one mask checkpoint per
/// iteration.
#[derive(Debug, Clone, Default)]
pub struct BcdRunLog {
    pub iterations: Vec<IterationRecord>,
    pub checkpoints: Vec<ReluMask>,
}

impl BcdRunLog {
    /// Budget-vs-accuracy table as CSV.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,budget,acc_before_finetune,acc_after_finetune,trials_used\n");
        for rec in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.step,
                rec.budget_after,
                rec.acc_before_finetune,
                rec.acc_after_finetune,
                rec.trials_executed
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "iterations": self.iterations })
    }
}

/// Iteration count `T = ceil((b_ref - b_target) / drc)`.
pub fn num_steps(b_ref: usize, b_target: usize, drc: usize) -> Result<usize> {
    if b_ref < b_target {
        return Err(Error::BudgetTooLarge {
            target: b_target,
            current: b_ref,
        });
    }
    if drc == 0 {
        return Err(Error::Config("drc must be >= 1".into()));
    }
    Ok((b_ref - b_target).div_ceil(drc))
}

/// One coordinate-descent step: sample-evaluate-select.
///
/// Computes the baseline accuracy once, then runs trials in waves of
/// `cfg.threads`. The chosen removal is the lowest-indexed trial whose drop
/// beats the tolerance, else the argmin over all `rt` trials (earliest trial
/// wins ties). Per-trial RNG substreams are derived from
/// `(seed, step, trial)`, so the choice is identical for any wave size.
pub fn bcd_step<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    eval_set: &Dataset<S>,
    cfg: &BcdConfig,
    step_index: usize,
) -> Result<(RemovalSet, Vec<TrialResult>)> {
    let remaining = mask.l0().saturating_sub(cfg.b_target);
    if remaining == 0 {
        return Err(Error::Config(
            "bcd_step called at or below the target".into(),
        ));
    }
    let removal_size = cfg.drc.min(remaining);
    let baseline = evaluate_accuracy(spec, params, mask, eval_set)?;

    let mut trials: Vec<TrialResult> = Vec::with_capacity(cfg.rt);
    let mut accepted: Option<usize> = None;

    let mut trial = 0usize;
    while trial < cfg.rt && accepted.is_none() {
        let wave_end = (trial + cfg.threads).min(cfg.rt);
        let wave: Vec<usize> = (trial..wave_end).collect();
        let mut wave_results: Vec<TrialResult> = if cfg.threads == 1 {
            wave.iter()
                .map(|&t| {
                    run_trial(
                        spec,
                        params,
                        mask,
                        eval_set,
                        cfg,
                        baseline,
                        step_index,
                        t,
                        removal_size,
                    )
                })
                .collect::<Result<_>>()?
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|&t| {
                        scope.spawn(move || {
                            run_trial(
                                spec,
                                params,
                                mask,
                                eval_set,
                                cfg,
                                baseline,
                                step_index,
                                t,
                                removal_size,
                            )
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("trial thread"))
                    .collect::<Result<Vec<_>>>()
            })?
        };
        for result in wave_results.drain(..) {
            let idx = result.trial_index;
            let delta = result.delta_acc;
            trials.push(result);
            if accepted.is_none() && delta < cfg.adt_percent {
                accepted = Some(idx);
                // Results later in this wave were already computed; keep
                // them in the log but do not start another wave.
            }
        }
        trial = wave_end;
    }

    let chosen = match accepted {
        Some(idx) => idx,
        None => {
            // Argmin with earliest-trial tie-breaking; trials are in index
            // order, so a strict comparison suffices.
            let mut best = 0usize;
            for (i, t) in trials.iter().enumerate() {
                if t.delta_acc < trials[best].delta_acc {
                    best = i;
                }
            }
            trials[best].trial_index
        }
    };
    let removal = trials
        .iter()
        .find(|t| t.trial_index == chosen)
        .expect("chosen trial present")
        .removal
        .clone();
    Ok((removal, trials))
}

#[allow(clippy::too_many_arguments)]
fn run_trial<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    eval_set: &Dataset<S>,
    cfg: &BcdConfig,
    baseline: f64,
    step_index: usize,
    trial: usize,
    removal_size: usize,
) -> Result<TrialResult> {
    let mut rng = substream(cfg.seed, "bcd-trial", &[step_index as u64, trial as u64]);
    let removal = mask.sample_removal(removal_size, &mut rng)?;
    let hypothesis = mask.apply_removal(&removal)?;
    let acc = evaluate_accuracy(spec, params, &hypothesis, eval_set)?;
    Ok(TrialResult {
        trial_index: trial,
        removal,
        delta_acc: baseline - acc,
    })
}

/// Full reduction run from `mask`'s budget down to exactly `cfg.b_target`,
/// finetuning after every removal.
pub fn bcd_run<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    dataset: &Dataset<S>,
    cfg: &BcdConfig,
) -> Result<(Parameters<S>, ReluMask, BcdRunLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.b_target > mask.l0() {
        return Err(Error::BudgetTooLarge {
            target: cfg.b_target,
            current: mask.l0(),
        });
    }
    let eval_set = match cfg.eval_subset_size {
        Some(n) if n < dataset.len() => dataset.subset(n, cfg.seed)?,
        _ => dataset.clone(),
    };

    let steps = num_steps(mask.l0(), cfg.b_target, cfg.drc)?;
    let mut params = params.clone();
    let mut mask = mask.clone();
    let mut log = BcdRunLog::default();

    for step in 0..steps {
        let budget_before = mask.l0();
        let (removal, trials) = bcd_step(spec, &params, &mask, &eval_set, cfg, step)?;
        let chosen = trials
            .iter()
            .find(|t| t.removal == removal)
            .expect("chosen trial");
        mask = mask.apply_removal(&removal)?;
        let acc_before_finetune = evaluate_accuracy(spec, &params, &mask, &eval_set)?;
        finetune(spec, &mut params, &mask, dataset, &cfg.finetune)?;
        let acc_after_finetune = evaluate_accuracy(spec, &params, &mask, &eval_set)?;
        log.iterations.push(IterationRecord {
            step,
            budget_before,
            budget_after: mask.l0(),
            trials_executed: trials.len(),
            chosen_trial: chosen.trial_index,
            chosen_delta_acc: chosen.delta_acc,
            baseline_acc: acc_before_finetune + chosen.delta_acc,
            acc_before_finetune,
            acc_after_finetune,
        });
        log.checkpoints.push(mask.clone());
    }
    debug_assert_eq!(mask.l0(), cfg.b_target);
    Ok((params, mask, log))
}
