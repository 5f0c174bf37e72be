//! Browser playground for ReLU-budget reduction.
//!
//! Three interactive surfaces, rendered by the static page in `www/`:
//! an adjustable cosine-annealing schedule, the hysteresis indicator's
//! dead-band behaviour, and a live block-coordinate-descent run on a tiny
//! spiral classifier with its decision boundary and per-layer ReLU budgets.
//!
//! Everything here is a thin `wasm_bindgen` shim over the core crate; the
//! same functions compile and run natively, which is how the crate's tests
//! execute.

use wasm_bindgen::prelude::*;

use relu_sculpt_core::bcd::{bcd_step, BcdConfig};
use relu_sculpt_core::data::{embed_grid, gen_spirals, Dataset};
use relu_sculpt_core::engine::evaluate_accuracy;
use relu_sculpt_core::mask::ReluMask;
use relu_sculpt_core::net::{tiny_grid_cnn, NetworkSpec};
use relu_sculpt_core::params::Parameters;
use relu_sculpt_core::snl::hysteresis_update;
use relu_sculpt_core::tensor::Tensor;
use relu_sculpt_core::train::{cosine_lr, finetune, OptimizerKind, TrainConfig};

const GRID: usize = 12;
const CLASSES: usize = 3;
const POINT_EXTENT: f64 = 1.25;

/// Cosine-annealed learning rate sampled at `points` steps across the
/// schedule, for plotting.
#[wasm_bindgen]
pub fn cosine_curve(lr_max: f64, lr_min: f64, t_max: usize, points: usize) -> Vec<f64> {
    let t_max = t_max.max(1);
    let points = points.clamp(2, 4096);
    (0..points)
        .map(|i| {
            let t = (i as f64 / (points - 1) as f64 * t_max as f64).round() as usize;
            cosine_lr(t, t_max, lr_max, lr_min)
        })
        .collect()
}

/// Drive the hysteresis indicator with a triangle-wave score sweeping
/// `[-amplitude, amplitude]` and return `[score, state]` pairs, which plot
/// as the classic loop: the on->off and off->on transitions happen at
/// different thresholds.
#[wasm_bindgen]
pub fn hysteresis_trace(t_h: f64, amplitude: f64, steps: usize) -> Vec<f64> {
    let steps = steps.clamp(8, 4096);
    let mut state = false;
    let mut out = Vec::with_capacity(steps * 2);
    for i in 0..steps {
        // One full up-down sweep.
        let phase = i as f64 / (steps - 1) as f64;
        let score = if phase < 0.5 {
            -amplitude + 4.0 * amplitude * phase
        } else {
            3.0 * amplitude - 4.0 * amplitude * phase
        };
        state = hysteresis_update(state, score, t_h);
        out.push(score);
        out.push(if state { 1.0 } else { 0.0 });
    }
    out
}

struct Task {
    spec: NetworkSpec,
    input_shape: Vec<usize>,
    points: Dataset<f32>,
    train: Dataset<f32>,
}

fn build_task(seed: u64) -> Task {
    let points = gen_spirals::<f32>(CLASSES, 140, 0.05, seed).expect("spirals");
    let train = embed_grid(&points, GRID, 0.12).expect("embedding");
    Task {
        spec: tiny_grid_cnn(GRID, CLASSES),
        input_shape: vec![1, GRID, GRID],
        points,
        train,
    }
}

fn demo_train_cfg(seed: u64, epochs: usize, lr_max: f64) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        lr_max,
        lr_min: 1e-5,
        epochs,
        batch_size: 32,
        seed,
    }
}

/// A live reduction run: pretrain once, then shave ReLUs step by step.
#[wasm_bindgen]
pub struct ReductionDemo {
    task: Task,
    params: Parameters<f32>,
    mask: ReluMask,
    cfg: BcdConfig,
    step_index: usize,
}

#[wasm_bindgen]
impl ReductionDemo {
    /// Build the task and pretrain the dense network.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, pretrain_epochs: usize) -> Result<ReductionDemo, JsError> {
        let task = build_task(seed);
        let mask = ReluMask::all_ones(&task.spec, &task.input_shape).map_err(err)?;
        let mut params = Parameters::<f32>::init(&task.spec, seed);
        finetune(
            &task.spec,
            &mut params,
            &mask,
            &task.train,
            &demo_train_cfg(seed, pretrain_epochs.clamp(1, 200), 3e-3),
        )
        .map_err(err)?;
        let cfg = BcdConfig {
            drc: 64,
            adt_percent: 0.3,
            rt: 12,
            b_target: 0,
            finetune: demo_train_cfg(seed, 2, 1e-3),
            eval_subset_size: None,
            seed,
            threads: 1,
        };
        Ok(ReductionDemo {
            task,
            params,
            mask,
            cfg,
            step_index: 0,
        })
    }

    /// Total maskable sites in the architecture.
    pub fn total_sites(&self) -> usize {
        ReluMask::all_ones(&self.task.spec, &self.task.input_shape)
            .map(|m| m.l0())
            .unwrap_or(0)
    }

    pub fn budget(&self) -> usize {
        self.mask.l0()
    }

    pub fn train_accuracy(&self) -> Result<f64, JsError> {
        evaluate_accuracy(&self.task.spec, &self.params, &self.mask, &self.task.train).map_err(err)
    }

    /// ReLUs removed per step.
    pub fn set_drc(&mut self, drc: usize) {
        self.cfg.drc = drc.clamp(1, 512);
    }

    /// One sample-evaluate-select-finetune iteration; returns a JSON record
    /// of what happened.
    pub fn step(&mut self) -> Result<String, JsError> {
        let remaining = self.mask.l0();
        if remaining <= self.cfg.drc {
            return Err(JsError::new("budget too small for another step"));
        }
        self.cfg.b_target = remaining - self.cfg.drc;
        let (removal, trials) = bcd_step(
            &self.task.spec,
            &self.params,
            &self.mask,
            &self.task.train,
            &self.cfg,
            self.step_index,
        )
        .map_err(err)?;
        self.mask = self.mask.apply_removal(&removal).map_err(err)?;
        let before = self.train_accuracy()?;
        finetune(
            &self.task.spec,
            &mut self.params,
            &self.mask,
            &self.task.train,
            &self.cfg.finetune,
        )
        .map_err(err)?;
        let after = self.train_accuracy()?;
        self.step_index += 1;
        Ok(serde_json::json!({
            "step": self.step_index,
            "budget": self.mask.l0(),
            "trials": trials.len(),
            "acc_before_finetune": before,
            "acc_after_finetune": after,
        })
        .to_string())
    }

    /// Per-layer `[site_count, on_count]` pairs, flattened.
    pub fn layer_budgets(&self) -> Vec<u32> {
        self.mask
            .per_layer_counts()
            .iter()
            .enumerate()
            .flat_map(|(i, &(_, on))| [self.mask.layer_sites(i) as u32, on as u32])
            .collect()
    }

    /// Class map over the 2-D input square at `res x res`, row-major class
    /// indices, for boundary rendering.
    pub fn boundary(&self, res: usize) -> Result<Vec<u8>, JsError> {
        let res = res.clamp(8, 160);
        let mut grid_points = Vec::with_capacity(res * res * 2);
        let mut labels = Vec::with_capacity(res * res);
        for gy in 0..res {
            let y = -POINT_EXTENT + 2.0 * POINT_EXTENT * (gy as f64 + 0.5) / res as f64;
            for gx in 0..res {
                let x = -POINT_EXTENT + 2.0 * POINT_EXTENT * (gx as f64 + 0.5) / res as f64;
                grid_points.push(x as f32);
                grid_points.push(y as f32);
                labels.push(0usize);
            }
        }
        let probe = Dataset::new(
            Tensor::new(vec![res * res, 2, 1, 1], grid_points).map_err(err)?,
            labels,
            CLASSES,
        )
        .map_err(err)?;
        let embedded = embed_grid(&probe, GRID, 0.12).map_err(err)?;
        let mut out = Vec::with_capacity(res * res);
        for i in 0..embedded.len() {
            let logits = relu_sculpt_core::engine::forward(
                &self.task.spec,
                &self.params,
                &self.mask,
                &embedded.sample(i),
            )
            .map_err(err)?;
            out.push(logits.argmax() as u8);
        }
        Ok(out)
    }

    /// Training points as `[x, y, class]` triples, flattened.
    pub fn points(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.task.points.len() * 3);
        for i in 0..self.task.points.len() {
            let s = self.task.points.sample(i);
            out.push(s.data()[0]);
            out.push(s.data()[1]);
            out.push(self.task.points.labels[i] as f32);
        }
        out
    }
}

fn err(e: relu_sculpt_core::error::Error) -> JsError {
    JsError::new(&e.to_string())
}
