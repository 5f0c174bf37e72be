//! `run-snl`: the relaxed selective baseline with per-epoch mask
//! checkpoints. Exits with the soft-failure code when the epoch budget runs
//! out before the ReLU budget is met.

use std::path::Path;

use relu_sculpt_core::engine::evaluate_accuracy;
use relu_sculpt_core::error::Result;
use relu_sculpt_core::snl::{snl_run, SnlConfig};

use crate::configs::RunSnlConfig;
use crate::logging;
use crate::manifest::ManifestBuilder;

/// Returns `true` when the target budget was reached (exit 0) and `false`
/// for the best-effort "target_not_reached" outcome (exit 2).
pub fn run(
    config_path: &Path,
    cfg: &RunSnlConfig,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<bool> {
    super::ensure_out_dir(out)?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let spec = cfg.network.load_spec(base)?;
    let mut params = cfg.network.load_params(base, &spec, seed)?;
    let dataset = cfg.dataset.build(base)?;
    if let Some(pretrain) = &cfg.pretrain {
        let dense = relu_sculpt_core::mask::ReluMask::all_ones(&spec, &cfg.network.input_shape)?;
        let pretrain = relu_sculpt_core::train::TrainConfig {
            seed,
            ..pretrain.clone()
        };
        logging::info(format!(
            "pretraining dense network for {} epochs",
            pretrain.epochs
        ));
        relu_sculpt_core::train::finetune(&spec, &mut params, &dense, &dataset, &pretrain)?;
    }
    let params = params;

    let snl_cfg = SnlConfig {
        train: relu_sculpt_core::train::TrainConfig {
            seed,
            ..cfg.snl.train.clone()
        },
        ..cfg.snl.clone()
    };
    logging::info(format!(
        "snl: target {} sites, lambda0 {}, kappa {}, up to {} epochs",
        snl_cfg.b_target, snl_cfg.lambda0, snl_cfg.kappa, snl_cfg.epochs
    ));

    let mut manifest = ManifestBuilder::new("run-snl", serde_json::to_value(cfg)?, seed, threads);
    let result = snl_run(&spec, &params, &dataset, &cfg.network.input_shape, &snl_cfg)?;

    result.mask.save_file(&out.join("final_mask.rmsk1"))?;
    manifest.add_output("final_mask.rmsk1");
    result.params.save_file(&out.join("theta_final.rsw1"))?;
    manifest.add_output("theta_final.rsw1");

    let ckpt_dir = out.join("checkpoints");
    super::ensure_out_dir(&ckpt_dir)?;
    let mut epochs_csv = String::from("epoch,budget,lambda,train_accuracy\n");
    let mut records = Vec::new();
    for c in &result.checkpoints {
        let name = format!(
            "checkpoints/epoch_{:04}_budget_{:07}.rmsk1",
            c.epoch, c.budget
        );
        c.mask.save_file(&out.join(&name))?;
        manifest.add_output(name);
        epochs_csv.push_str(&format!(
            "{},{},{},{}\n",
            c.epoch, c.budget, c.lambda, c.train_accuracy
        ));
        records.push(serde_json::json!({
            "epoch": c.epoch,
            "budget": c.budget,
            "lambda": c.lambda,
            "train_accuracy": c.train_accuracy,
        }));
    }
    std::fs::write(out.join("epochs.csv"), epochs_csv)?;
    manifest.add_output("epochs.csv");
    std::fs::write(
        out.join("snl_log.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "epochs_run": result.epochs_run,
            "final_lambda": result.final_lambda,
            "target_reached": result.target_reached,
            "acc_before_binarize": result.acc_before_binarize,
            "acc_after_binarize": result.acc_after_binarize,
            "acc_after_finetune": result.acc_after_finetune,
            "checkpoints": records,
        }))?,
    )?;
    manifest.add_output("snl_log.json");

    let train_accuracy = result.acc_after_finetune;
    let test_accuracy = match &cfg.test_dataset {
        Some(tc) => Some(evaluate_accuracy(
            &spec,
            &result.params,
            &result.mask,
            &tc.build(base)?,
        )?),
        None => None,
    };
    let results = super::RunResults {
        method: "snl".to_string(),
        budget: result.mask.l0(),
        seed,
        train_accuracy,
        test_accuracy,
        target_reached: Some(result.target_reached),
        acc_before_binarize: Some(result.acc_before_binarize),
        acc_after_binarize: Some(result.acc_after_binarize),
    };
    std::fs::write(
        out.join("results.json"),
        serde_json::to_string_pretty(&results)?,
    )?;
    manifest.add_output("results.json");

    let status = if result.target_reached {
        "ok"
    } else {
        "target_not_reached"
    };
    manifest.finish(out, status)?;
    logging::info(format!(
        "snl done: budget {} ({}), binarize {:.2}% -> {:.2}%, finetuned {:.2}%",
        result.mask.l0(),
        status,
        result.acc_before_binarize,
        result.acc_after_binarize,
        result.acc_after_finetune
    ));
    Ok(result.target_reached)
}
