//! `audit-bounds`: brute-force optimum plus descent-bound audit on a tiny
//! problem. The satisfaction fraction for the probabilistic bound is
//! reported, never asserted: the objective is nonconvex, so the convex-case
//! guarantee is a reference line, not a contract.

use std::path::Path;

use relu_sculpt_core::bcd::BcdConfig;
use relu_sculpt_core::error::{Error, Result};
use relu_sculpt_core::oracle::{audit_run, estimate_beta, TinyProblem};
use relu_sculpt_core::train::TrainConfig;

use crate::configs::AuditBoundsConfig;
use crate::logging;
use crate::manifest::ManifestBuilder;

pub fn run(
    config_path: &Path,
    cfg: &AuditBoundsConfig,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<()> {
    super::ensure_out_dir(out)?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let spec = cfg.network.load_spec(base)?;
    let params = cfg.network.load_params(base, &spec, seed)?.map_to::<f64>();
    let dataset = cfg.dataset.build(base)?.map_to::<f64>();

    let mut problem = TinyProblem {
        spec,
        params,
        dataset,
        input_shape: cfg.network.input_shape.clone(),
        lambda: cfg.lambda,
        beta: 0.0,
        max_enumeration: cfg.max_enumeration,
    };
    let d = problem.site_count()?;
    let total = 1u128
        .checked_shl(d as u32)
        .ok_or_else(|| Error::Config(format!("{d} sites cannot be enumerated")))?;
    if total > cfg.max_enumeration {
        return Err(Error::EnumerationCap {
            count: total,
            cap: cfg.max_enumeration,
        });
    }

    problem.beta = match cfg.beta {
        Some(b) => b,
        None => {
            let est = estimate_beta(&problem, cfg.beta_samples, seed)?;
            logging::info(format!("estimated beta = {est:.6}"));
            est
        }
    };

    let bcd_cfg = BcdConfig {
        drc: cfg.drc,
        adt_percent: cfg.adt_percent,
        rt: cfg.rt,
        b_target: cfg.budget,
        finetune: TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        eval_subset_size: None,
        seed,
        threads,
    };

    let mut manifest =
        ManifestBuilder::new("audit-bounds", serde_json::to_value(cfg)?, seed, threads);
    let report = audit_run(&problem, cfg.budget, &bcd_cfg, cfg.n_seeds)?;

    std::fs::write(
        out.join("audit_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    manifest.add_output("audit_report.json");
    std::fs::write(out.join("audit_report.csv"), report.to_csv())?;
    manifest.add_output("audit_report.csv");
    manifest.finish(out, "ok")?;

    println!(
        "d = {}, budget = {}, T = {}, p* = {:.6}",
        report.d, report.budget, report.steps, report.p_star
    );
    println!(
        "mean gap {:.6} vs expected-bound RHS {:.6}; per-seed satisfaction {:.0}% (probabilistic RHS {:.6})",
        report.mean_gap,
        report.expected_rhs,
        100.0 * report.satisfaction_fraction,
        report.probabilistic_rhs
    );
    Ok(())
}
