//! `run-bcd`: end-to-end coordinate-descent reduction with full artifacts.

use std::path::Path;

use relu_sculpt_core::bcd::{bcd_run, BcdConfig};
use relu_sculpt_core::engine::evaluate_accuracy;
use relu_sculpt_core::error::Result;
use relu_sculpt_core::mask::ReluMask;

use crate::configs::RunBcdConfig;
use crate::logging;
use crate::manifest::ManifestBuilder;

pub fn run(
    config_path: &Path,
    cfg: &RunBcdConfig,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<()> {
    super::ensure_out_dir(out)?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let spec = cfg.network.load_spec(base)?;
    let mut params = cfg.network.load_params(base, &spec, seed)?;
    let dataset = cfg.dataset.build(base)?;
    let start_mask = match &cfg.bcd.start_mask {
        Some(p) => ReluMask::load_file(&base.join(p))?,
        None => ReluMask::all_ones(&spec, &cfg.network.input_shape)?,
    };
    if let Some(pretrain) = &cfg.pretrain {
        let dense = ReluMask::all_ones(&spec, &cfg.network.input_shape)?;
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
    logging::info(format!(
        "bcd: {} sites -> {} (drc {}, rt {}, adt {}%)",
        start_mask.l0(),
        cfg.bcd.b_target,
        cfg.bcd.drc,
        cfg.bcd.rt,
        cfg.bcd.adt_percent
    ));

    let bcd_cfg = BcdConfig {
        drc: cfg.bcd.drc,
        adt_percent: cfg.bcd.adt_percent,
        rt: cfg.bcd.rt,
        b_target: cfg.bcd.b_target,
        finetune: cfg.bcd.finetune.clone(),
        eval_subset_size: cfg.bcd.eval_subset_size,
        seed,
        threads,
    };

    let mut manifest = ManifestBuilder::new("run-bcd", serde_json::to_value(cfg)?, seed, threads);

    let (theta, mask, log) = bcd_run(&spec, &params, &start_mask, &dataset, &bcd_cfg)?;

    mask.save_file(&out.join("final_mask.rmsk1"))?;
    manifest.add_output("final_mask.rmsk1");
    theta.save_file(&out.join("theta_final.rsw1"))?;
    manifest.add_output("theta_final.rsw1");

    std::fs::write(
        out.join("run_log.json"),
        serde_json::to_string_pretty(&log.to_json())?,
    )?;
    manifest.add_output("run_log.json");
    std::fs::write(out.join("budget_vs_accuracy.csv"), log.to_csv())?;
    manifest.add_output("budget_vs_accuracy.csv");

    let ckpt_dir = out.join("checkpoints");
    super::ensure_out_dir(&ckpt_dir)?;
    for (i, ckpt) in log.checkpoints.iter().enumerate() {
        let name = format!(
            "checkpoints/step_{:04}_budget_{:07}.rmsk1",
            i + 1,
            ckpt.l0()
        );
        ckpt.save_file(&out.join(&name))?;
        logging::debug(format!("checkpoint {name}"));
        manifest.add_output(name);
    }

    let train_accuracy = evaluate_accuracy(&spec, &theta, &mask, &dataset)?;
    let test_accuracy = match &cfg.test_dataset {
        Some(tc) => Some(evaluate_accuracy(&spec, &theta, &mask, &tc.build(base)?)?),
        None => None,
    };
    let results = super::RunResults {
        method: "bcd".to_string(),
        budget: mask.l0(),
        seed,
        train_accuracy,
        test_accuracy,
        target_reached: Some(true),
        acc_before_binarize: None,
        acc_after_binarize: None,
    };
    std::fs::write(
        out.join("results.json"),
        serde_json::to_string_pretty(&results)?,
    )?;
    manifest.add_output("results.json");

    manifest.finish(out, "ok")?;
    logging::info(format!(
        "bcd done: budget {}, train acc {train_accuracy:.2}%",
        mask.l0()
    ));
    Ok(())
}
