//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured values. Run with
//! `cargo test -p relu-sculpt-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use relu_sculpt_core::bcd::{bcd_run, num_steps, BcdConfig};
use relu_sculpt_core::data::{
    embed_grid, gen_blobs, gen_spirals, gen_synthetic_cifar, load_cifar10_bin, save_cifar10_bin,
    Dataset,
};
use relu_sculpt_core::engine::{evaluate_accuracy, maskable_inputs, Gate};
use relu_sculpt_core::gradcheck::{max_alpha_grad_error, max_param_grad_error_gated, DEFAULT_STEP};
use relu_sculpt_core::mask::ReluMask;
use relu_sculpt_core::net::{mask_layout, tiny_grid_cnn, Layer, NetworkSpec, Replacement};
use relu_sculpt_core::oracle::{
    audit_run, bound_rhs, brute_force_opt, p_of_m, BoundVariant, TinyProblem,
};
use relu_sculpt_core::params::Parameters;
use relu_sculpt_core::rng::substream;
use relu_sculpt_core::snl::{hysteresis_update, snl_run, SnlConfig, SoftMask};
use relu_sculpt_core::tensor::Tensor;
use relu_sculpt_core::train::{cosine_lr, finetune, OptimizerKind, TrainConfig};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("acceptance_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Criterion 1: the bundled ResNet18-style spec counts 557,056 ReLUs at
/// 32x32 in the documented per-layer pattern, exactly 4x that per layer at
/// 64x64, in under a second.
#[test]
fn criterion_01_relu_counting() {
    let start = Instant::now();
    let spec_path = repo_root().join("specs/resnet18_cifar.json");
    let spec = NetworkSpec::from_file(&spec_path).unwrap();

    let layout32 = mask_layout(&spec, &[3, 32, 32]).unwrap();
    let counts: Vec<usize> = layout32.sites.iter().map(|&(_, n)| n).collect();
    let mut expected = vec![65536usize; 5];
    expected.extend([32768; 4]);
    expected.extend([16384; 4]);
    expected.extend([8192; 4]);
    assert_eq!(counts, expected);
    assert_eq!(layout32.total_sites(), 557_056);

    let layout64 = mask_layout(&spec, &[3, 64, 64]).unwrap();
    for ((_, a), (_, b)) in layout32.sites.iter().zip(layout64.sites.iter()) {
        assert_eq!(*b, 4 * a);
    }

    // And through the CLI.
    let out = Command::new(env!("CARGO_BIN_EXE_relu-sculpt"))
        .args([
            "count-relus",
            spec_path.to_str().unwrap(),
            "--input-shape",
            "3,32,32",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("557056"));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "[criterion 1] PASS - per-layer pattern 65536x5/32768x4/16384x4/8192x4, \
         total 557056, 64x64 = 4x per layer, in {elapsed:?}"
    );
}

/// Criterion 2: analytic gradients match central finite differences at
/// relative error <= 1e-6 for every layer type and the soft-mask path, over
/// at least 20 randomized tiny nets, within 30 seconds.
#[test]
fn criterion_02_gradient_suite() {
    let start = Instant::now();
    let act = |replacement| Layer::MaskableActivation {
        site_count: None,
        replacement,
    };
    let poly = Replacement::Poly {
        a: 0.25,
        b: 0.5,
        c: 0.0,
    };
    // Every layer type appears: conv (padded, strided), linear, both
    // replacements, avg_pool, flatten, residual pairs.
    let zoo: Vec<(NetworkSpec, Vec<usize>)> = vec![
        (
            NetworkSpec::new(vec![
                Layer::Flatten,
                Layer::Linear {
                    input: 6,
                    output: 5,
                },
                act(Replacement::Identity),
                Layer::Linear {
                    input: 5,
                    output: 3,
                },
            ]),
            vec![6],
        ),
        (
            NetworkSpec::new(vec![
                Layer::Conv2d {
                    in_ch: 2,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                act(poly),
                Layer::AvgPool { k: 2 },
                Layer::Flatten,
                Layer::Linear {
                    input: 12,
                    output: 3,
                },
            ]),
            vec![2, 4, 4],
        ),
        (
            NetworkSpec::new(vec![
                Layer::Conv2d {
                    in_ch: 1,
                    out_ch: 4,
                    kernel: 2,
                    stride: 2,
                    pad: 0,
                },
                act(Replacement::Identity),
                Layer::Flatten,
                Layer::Linear {
                    input: 36,
                    output: 2,
                },
            ]),
            vec![1, 6, 6],
        ),
        (
            NetworkSpec::new(vec![
                Layer::Conv2d {
                    in_ch: 2,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                act(Replacement::Identity),
                Layer::ResidualBegin { tag: "b".into() },
                Layer::Conv2d {
                    in_ch: 3,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                act(poly),
                Layer::Conv2d {
                    in_ch: 3,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                Layer::ResidualAdd { tag: "b".into() },
                act(Replacement::Identity),
                Layer::AvgPool { k: 1 },
                Layer::Flatten,
                Layer::Linear {
                    input: 3,
                    output: 2,
                },
            ]),
            vec![2, 4, 4],
        ),
    ];

    let mut params_checked = 0usize;
    let mut alpha_checked = 0usize;
    let mut worst = 0.0f64;
    let mut case = 0u64;
    while params_checked < 20 || alpha_checked < 20 {
        case += 1;
        let (spec, input_shape) = &zoo[(case as usize) % zoo.len()];
        let mut rng = substream(0xACCE97, "criterion2", &[case]);
        let params = Parameters::<f64>::init(spec, rng.gen());
        let len: usize = input_shape.iter().product();
        let x = Tensor::new(
            input_shape.clone(),
            (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        )
        .unwrap();
        let layout = mask_layout(spec, input_shape).unwrap();
        let mask = ReluMask::from_bits(
            &layout
                .sites
                .iter()
                .map(|&(idx, n)| (idx, (0..n).map(|_| rng.gen_bool(0.6)).collect()))
                .collect::<Vec<_>>(),
        );
        let alpha = SoftMask::from_values(
            layout.sites.iter().map(|&(i, _)| i).collect(),
            layout
                .sites
                .iter()
                .map(|&(_, n)| (0..n).map(|_| rng.gen_range(0.05..0.95)).collect())
                .collect(),
        );
        let clear = |gate: &Gate<'_, f64>| {
            maskable_inputs(spec, &params, gate, &x)
                .unwrap()
                .iter()
                .all(|t| t.iter().all(|v| v.abs() > 1e-3))
        };
        let label = (case as usize) % 2;
        if params_checked < 20 && clear(&Gate::Binary(&mask)) {
            let e = max_param_grad_error_gated(
                spec,
                &params,
                &Gate::Binary(&mask),
                &x,
                label,
                DEFAULT_STEP,
            )
            .unwrap();
            assert!(e <= 1e-6, "case {case}: param error {e:.3e}");
            worst = worst.max(e);
            params_checked += 1;
        }
        if alpha_checked < 20 && clear(&Gate::Soft(&alpha)) {
            let e =
                max_alpha_grad_error(spec, &params, &alpha, &x, label, 0.05, DEFAULT_STEP).unwrap();
            assert!(e <= 1e-6, "case {case}: alpha error {e:.3e}");
            let e2 = max_param_grad_error_gated(
                spec,
                &params,
                &Gate::Soft(&alpha),
                &x,
                label,
                DEFAULT_STEP,
            )
            .unwrap();
            assert!(e2 <= 1e-6, "case {case}: soft param error {e2:.3e}");
            worst = worst.max(e.max(e2));
            alpha_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[criterion 2] PASS - {params_checked} binary + {alpha_checked} soft nets, \
         worst relative error {worst:.2e} <= 1e-6, in {elapsed:?}"
    );
}

fn tiny_mlp(hidden: usize) -> NetworkSpec {
    NetworkSpec::new(vec![
        Layer::Flatten,
        Layer::Linear {
            input: 2,
            output: hidden,
        },
        Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        },
        Layer::Linear {
            input: hidden,
            output: 2,
        },
    ])
}

/// Criterion 3: 50 randomized (b_ref, b_target, drc) triples end at exactly
/// b_target with consecutive-checkpoint IoU exactly 1.0, within 2 minutes.
#[test]
fn criterion_03_budget_exactness_and_subset_chain() {
    let start = Instant::now();
    let ds = gen_blobs::<f32>(2, 12, 2, 6.0, 77).unwrap();
    let mut rng = substream(0xACCE97, "criterion3", &[]);
    for case in 0..50u64 {
        let hidden = rng.gen_range(6..=24usize);
        let spec = tiny_mlp(hidden);
        let b_target = rng.gen_range(0..=hidden);
        let drc = rng.gen_range(1..=8usize);
        let params = Parameters::<f32>::init(&spec, case);
        let mask = ReluMask::all_ones(&spec, &[2, 1, 1]).unwrap();
        let cfg = BcdConfig {
            drc,
            adt_percent: 0.3,
            rt: 3,
            b_target,
            finetune: TrainConfig {
                lr_max: 1e-2,
                epochs: 1,
                batch_size: 8,
                seed: case,
                ..Default::default()
            },
            eval_subset_size: None,
            seed: case,
            threads: 1,
        };
        let (_, final_mask, log) = bcd_run(&spec, &params, &mask, &ds, &cfg).unwrap();
        assert_eq!(final_mask.l0(), b_target, "case {case}");
        let mut prev = mask;
        for ckpt in &log.checkpoints {
            assert!(ckpt.is_subset_of(&prev), "case {case}");
            if ckpt.l0() > 0 {
                assert_eq!(ckpt.iou(&prev).unwrap(), 1.0, "case {case}");
            }
            prev = ckpt.clone();
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[criterion 3] PASS - 50 random triples: exact budgets, consecutive IoU = 1.0, in {elapsed:?}"
    );
}

/// Criterion 4: two CLI runs with the same config and seed produce
/// byte-identical RMSK1 final masks, including at --threads 4, within 2
/// minutes.
#[test]
fn criterion_04_run_determinism() {
    let start = Instant::now();
    let dir = tmp("criterion4");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::to_string_pretty(&serde_json::json!({
            "network": {
                "spec_inline": {"layers": [
                    {"type": "flatten"},
                    {"type": "linear", "in": 2, "out": 24},
                    {"type": "maskable_activation"},
                    {"type": "linear", "in": 24, "out": 3}
                ]},
                "input_shape": [2, 1, 1]
            },
            "dataset": {"spirals": {"classes": 3, "per_class": 24, "noise": 0.05, "seed": 4}},
            "bcd": {
                "drc": 4, "adt_percent": 0.3, "rt": 6, "b_target": 8,
                "finetune": {"lr_max": 0.01, "epochs": 1, "batch_size": 8}
            },
            "seed": 21
        }))
        .unwrap(),
    )
    .unwrap();
    let mut masks = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "4"), ("d", "4")] {
        let out_dir = dir.join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_relu-sculpt"))
            .args([
                "run-bcd",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        masks.push(std::fs::read(out_dir.join("final_mask.rmsk1")).unwrap());
    }
    assert!(masks.windows(2).all(|w| w[0] == w[1]));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[criterion 4] PASS - 4 runs (threads 1,1,4,4) byte-identical final masks, in {elapsed:?}"
    );
}

/// Criterion 5: the iteration-count formula, and removal totals across a
/// logged run summing to b_ref - b_target.
#[test]
fn criterion_05_step_formula_and_removal_accounting() {
    assert_eq!(num_steps(30_000, 15_000, 100).unwrap(), 150);

    let spec = tiny_mlp(20);
    let ds = gen_blobs::<f32>(2, 10, 2, 6.0, 5).unwrap();
    let params = Parameters::<f32>::init(&spec, 1);
    let mask = ReluMask::all_ones(&spec, &[2, 1, 1]).unwrap();
    let cfg = BcdConfig {
        drc: 6,
        adt_percent: 0.3,
        rt: 3,
        b_target: 7,
        finetune: TrainConfig {
            lr_max: 1e-2,
            epochs: 1,
            batch_size: 8,
            seed: 2,
            ..Default::default()
        },
        eval_subset_size: None,
        seed: 2,
        threads: 1,
    };
    let (_, final_mask, log) = bcd_run(&spec, &params, &mask, &ds, &cfg).unwrap();
    let removed: usize = log
        .iterations
        .iter()
        .map(|r| r.budget_before - r.budget_after)
        .sum();
    assert_eq!(removed, 20 - 7);
    assert_eq!(final_mask.l0(), 7);
    assert_eq!(log.iterations.len(), num_steps(20, 7, 6).unwrap());
    println!(
        "[criterion 5] PASS - num_steps(30000, 15000, 100) = 150; logged removals sum to b_ref - b_target"
    );
}

fn d10_problem(lambda: f64) -> TinyProblem {
    let spec = NetworkSpec::new(vec![
        Layer::Flatten,
        Layer::Linear {
            input: 2,
            output: 10,
        },
        Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        },
        Layer::Linear {
            input: 10,
            output: 2,
        },
    ]);
    let params = Parameters::<f64>::init(&spec, 33);
    let dataset = gen_blobs::<f64>(2, 16, 2, 5.0, 12).unwrap();
    TinyProblem {
        spec,
        params,
        dataset,
        input_shape: vec![2, 1, 1],
        lambda,
        beta: 1.0,
        max_enumeration: 1 << 16,
    }
}

/// Criterion 6: oracle soundness on d = 10 (exhaustive) and non-negative
/// audited gaps over 20 seeds, within 5 minutes.
#[test]
fn criterion_06_oracle_soundness() {
    let start = Instant::now();
    let problem = d10_problem(0.05);
    let budget = 5;
    let (m_star, p_star) = brute_force_opt(&problem, budget).unwrap();
    assert!(m_star.l0() <= budget);

    // Exhaustive re-verification over every feasible mask.
    let layout = mask_layout(&problem.spec, &problem.input_shape).unwrap();
    let mut feasible = 0usize;
    for pattern in 0..(1u64 << 10) {
        if pattern.count_ones() as usize > budget {
            continue;
        }
        let bits: Vec<bool> = (0..10).map(|i| pattern >> (9 - i) & 1 == 1).collect();
        let mask = ReluMask::from_bits(&[(layout.sites[0].0, bits)]);
        assert!(
            p_star <= p_of_m(&problem, &mask).unwrap() + 1e-12,
            "pattern {pattern:b} beats the oracle"
        );
        feasible += 1;
    }

    let cfg = BcdConfig {
        drc: 2,
        adt_percent: 0.3,
        rt: 3,
        b_target: budget,
        finetune: TrainConfig::default(),
        eval_subset_size: None,
        seed: 0,
        threads: 1,
    };
    let report = audit_run(&problem, budget, &cfg, 20).unwrap();
    assert_eq!(report.seeds.len(), 20);
    for s in &report.seeds {
        assert!(s.gap >= -1e-12, "seed {} gap {}", s.seed, s.gap);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[criterion 6] PASS - p* <= P(m) over {feasible} feasible masks; 20/20 gaps >= 0, in {elapsed:?}"
    );
}

/// Criterion 7: the bound audit emits both RHS values, per-seed gaps and the
/// satisfaction fraction (reported, not asserted); bound_rhs unit cases are
/// exact.
#[test]
fn criterion_07_bound_audit_report() {
    // Unit exactness.
    assert_eq!(bound_rhs(7, 3.5, 0, BoundVariant::Expected), 7.0 * 3.5);
    for (d, psi0, t) in [(3usize, 1.5f64, 4usize), (10, 6.0, 0), (5, 0.25, 9)] {
        assert_eq!(
            bound_rhs(d, psi0, t, BoundVariant::Probabilistic),
            2.0 * bound_rhs(d, psi0, t, BoundVariant::Expected)
        );
    }

    // CLI report round trip.
    let dir = tmp("criterion7");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::to_string_pretty(&serde_json::json!({
            "network": {
                "spec_inline": {"layers": [
                    {"type": "flatten"},
                    {"type": "linear", "in": 2, "out": 10},
                    {"type": "maskable_activation"},
                    {"type": "linear", "in": 10, "out": 2}
                ]},
                "input_shape": [2, 1, 1]
            },
            "dataset": {"blobs": {"classes": 2, "per_class": 16, "dims": 2, "separation": 5.0, "seed": 12}},
            "lambda": 0.05,
            "budget": 5,
            "drc": 2,
            "rt": 3,
            "adt_percent": 0.3,
            "n_seeds": 20,
            "seed": 33
        }))
        .unwrap(),
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_relu-sculpt"))
        .args([
            "audit-bounds",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("audit_report.json")).unwrap())
            .unwrap();
    assert!(report["expected_rhs"].as_f64().unwrap() > 0.0);
    assert_eq!(
        report["probabilistic_rhs"].as_f64().unwrap(),
        2.0 * report["expected_rhs"].as_f64().unwrap()
    );
    assert_eq!(report["seeds"].as_array().unwrap().len(), 20);
    let fraction = report["satisfaction_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&fraction));
    assert_eq!(report["theta_frozen"], true);

    let csv = std::fs::read_to_string(out_dir.join("audit_report.csv")).unwrap();
    assert!(csv.starts_with("seed,gap,eq3_rhs,eq6_rhs,satisfied"));
    assert_eq!(csv.lines().count(), 21);
    println!(
        "[criterion 7] PASS - audit report emits both RHS values, 20 per-seed gaps, \
         satisfaction fraction {fraction:.2} (reported, not asserted: objective is nonconvex)"
    );
}

// ---------------------------------------------------------------------------
// Criteria 8 and 9 share one protocol: the desk-scale three-way comparison.
// ---------------------------------------------------------------------------

const GRID: usize = 20;
const SIGMA: f64 = 0.08;
const SEEDS: u64 = 5;

fn desk_task(seed: u64) -> (Dataset<f32>, Dataset<f32>) {
    let train = embed_grid(
        &gen_spirals::<f32>(3, 500, 0.02, 1000 + seed).unwrap(),
        GRID,
        SIGMA,
    )
    .unwrap();
    let test = embed_grid(
        &gen_spirals::<f32>(3, 600, 0.02, 9000 + seed).unwrap(),
        GRID,
        SIGMA,
    )
    .unwrap();
    (train, test)
}

fn adam() -> OptimizerKind {
    OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    }
}

fn desk_ft(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        optimizer: adam(),
        lr_max: 1e-3,
        lr_min: 2e-4,
        epochs,
        batch_size: 32,
        seed,
    }
}

struct DeskOutcome {
    bcd_test: f64,
    rand_test: f64,
    snl_test: f64,
    snl_before_binarize: f64,
    snl_after_binarize: f64,
}

fn desk_seed_run(seed: u64) -> DeskOutcome {
    let spec = tiny_grid_cnn(GRID, 3);
    let shape = vec![1usize, GRID, GRID];
    let (train, test) = desk_task(seed);
    let ones = ReluMask::all_ones(&spec, &shape).unwrap();
    let full = ones.l0();
    let b_target = full / 4;

    let mut theta0 = Parameters::<f32>::init(&spec, seed);
    finetune(
        &spec,
        &mut theta0,
        &ones,
        &train,
        &TrainConfig {
            optimizer: adam(),
            lr_max: 3e-3,
            lr_min: 1e-4,
            epochs: 80,
            batch_size: 32,
            seed,
        },
    )
    .unwrap();

    // (a) Coordinate descent to exactly 25%.
    let cfg = BcdConfig {
        drc: 100,
        adt_percent: 0.1,
        rt: 50,
        b_target,
        finetune: desk_ft(seed, 3),
        eval_subset_size: None,
        seed,
        threads: 1,
    };
    let (theta_bcd, mask_bcd, log) = bcd_run(&spec, &theta0, &ones, &train, &cfg).unwrap();
    assert_eq!(mask_bcd.l0(), b_target);
    let bcd_test = evaluate_accuracy(&spec, &theta_bcd, &mask_bcd, &test).unwrap();

    // (c) One-shot random removal of the same site count, then the identical
    // finetune routine for the same total epochs BCD consumed.
    let mut rng = substream(seed, "random-prune", &[]);
    let removal = ones.sample_removal(full - b_target, &mut rng).unwrap();
    let mask_rand = ones.apply_removal(&removal).unwrap();
    let mut theta_rand = theta0.clone();
    finetune(
        &spec,
        &mut theta_rand,
        &mask_rand,
        &train,
        &desk_ft(seed, 3 * log.iterations.len()),
    )
    .unwrap();
    let rand_test = evaluate_accuracy(&spec, &theta_rand, &mask_rand, &test).unwrap();

    // (b) The selective baseline straight to the target.
    let snl = snl_run(
        &spec,
        &theta0,
        &train,
        &shape,
        &SnlConfig {
            lambda0: 1e-4,
            kappa: 1.5,
            threshold: 0.5,
            epochs: 80,
            budget_check_interval: 2,
            stall_min_decrease: None,
            b_target,
            train: desk_ft(seed, 10),
        },
    )
    .unwrap();
    assert!(snl.mask.l0() <= b_target, "snl stuck at {}", snl.mask.l0());
    let snl_test = evaluate_accuracy(&spec, &snl.params, &snl.mask, &test).unwrap();

    DeskOutcome {
        bcd_test,
        rand_test,
        snl_test,
        snl_before_binarize: snl.acc_before_binarize,
        snl_after_binarize: snl.acc_after_binarize,
    }
}

/// Criteria 8 and 9: on the default 3-class spiral task with a ~3K-site net
/// reduced to a 25% budget over 5 seeds, mean test accuracy orders as
/// BCD >= random-prune and BCD >= SNL - 0.5pp; and hard thresholding costs
/// the SNL runs accuracy (mean drop within +0.5pp slack). Under 15 minutes.
#[test]
fn criterion_08_and_09_desk_scale_comparison() {
    let start = Instant::now();
    // Seeds run two at a time; each run is internally deterministic.
    let mut outcomes: Vec<(u64, DeskOutcome)> = Vec::new();
    let mut pending: Vec<u64> = (0..SEEDS).collect();
    while !pending.is_empty() {
        let chunk: Vec<u64> = pending.drain(..pending.len().min(2)).collect();
        let results: Vec<(u64, DeskOutcome)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| scope.spawn(move || (seed, desk_seed_run(seed))))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        outcomes.extend(results);
    }
    outcomes.sort_by_key(|(seed, _)| *seed);

    let mean = |f: &dyn Fn(&DeskOutcome) -> f64| {
        outcomes.iter().map(|(_, o)| f(o)).sum::<f64>() / outcomes.len() as f64
    };
    for (seed, o) in &outcomes {
        println!(
            "  seed {seed}: bcd {:.2} rand {:.2} snl {:.2} (binarize {:.2} -> {:.2})",
            o.bcd_test, o.rand_test, o.snl_test, o.snl_before_binarize, o.snl_after_binarize
        );
    }
    let bcd = mean(&|o| o.bcd_test);
    let rand = mean(&|o| o.rand_test);
    let snl = mean(&|o| o.snl_test);

    assert!(
        bcd >= rand,
        "criterion 8 FAILED: mean BCD {bcd:.3} < mean random-prune {rand:.3}"
    );
    assert!(
        bcd >= snl - 0.5,
        "criterion 8 FAILED: mean BCD {bcd:.3} < mean SNL {snl:.3} - 0.5"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 900.0, "took {elapsed:?}");
    println!(
        "[criterion 8] PASS - mean test acc over {SEEDS} seeds: BCD {bcd:.2}% >= random {rand:.2}% \
         and >= SNL {snl:.2}% - 0.5pp, in {elapsed:?}"
    );

    let drop = mean(&|o| o.snl_after_binarize - o.snl_before_binarize);
    assert!(
        drop <= 0.5,
        "criterion 9 FAILED: mean binarization delta {drop:.3}pp exceeds +0.5pp slack"
    );
    println!(
        "[criterion 9] PASS - mean accuracy delta across hard thresholding {drop:+.2}pp <= +0.5pp slack"
    );
}

/// Criterion 10: the hysteresis truth table, all eight sign/state
/// combinations plus the no-flip band.
#[test]
fn criterion_10_hysteresis_truth_table() {
    let th = 0.5;
    let cases = [
        // (state, score, expected) per the piecewise definition.
        (true, 0.6, true),   // m_W > t_h
        (true, 0.2, true),   // 0 < m_W <= t_h
        (true, -0.2, true),  // -t_h < m_W <= 0
        (true, -0.6, false), // m_W <= -t_h
        (false, 0.6, true),
        (false, 0.2, false),
        (false, -0.2, false),
        (false, -0.6, false),
    ];
    for (state, score, expected) in cases {
        assert_eq!(
            hysteresis_update(state, score, th),
            expected,
            "state {state} score {score}"
        );
    }
    // No-flip band: strictly inside (-t_h, t_h] an on bit survives and an
    // off bit stays off for anything at or below t_h.
    for score in [-0.49, -0.25, 0.0, 0.25, 0.5] {
        assert!(hysteresis_update(true, score, th));
        assert!(!hysteresis_update(false, score, th));
    }
    println!("[criterion 10] PASS - all 8 sign/state combinations and the no-flip band");
}

/// Criterion 11: format round trips. CIFAR-10 fixture bit-exact, RMSK1
/// identity over 1000 random masks, corrupted L0 trailer rejected.
#[test]
fn criterion_11_formats() {
    // CIFAR-10 binary.
    let ds = gen_synthetic_cifar::<f32>(5, 6, 3).unwrap();
    let bytes = save_cifar10_bin(&ds).unwrap();
    let back = load_cifar10_bin::<f32>(&bytes, [0.0; 3], [1.0; 3]).unwrap();
    assert_eq!(save_cifar10_bin(&back).unwrap(), bytes);

    // RMSK1 volume round trip.
    let mut rng = substream(0xF0, "criterion11", &[]);
    for _ in 0..1000 {
        let layers: Vec<(usize, Vec<bool>)> = (0..rng.gen_range(1..=4usize))
            .map(|li| {
                let n = rng.gen_range(1..=64usize);
                (li, (0..n).map(|_| rng.gen_bool(0.5)).collect())
            })
            .collect();
        let mask = ReluMask::from_bits(&layers);
        let encoded = mask.to_bytes();
        assert_eq!(ReluMask::deserialize(encoded.as_slice()).unwrap(), mask);
    }

    // Trailer corruption must be rejected.
    let mask = ReluMask::from_bits(&[(0, vec![true, false, true, true])]);
    let mut bad = mask.to_bytes();
    let n = bad.len();
    bad[n - 8] ^= 0x01;
    assert!(ReluMask::deserialize(bad.as_slice()).is_err());

    println!(
        "[criterion 11] PASS - CIFAR-10 fixture bit-exact, 1000 RMSK1 round trips, corrupted trailer rejected"
    );
}

/// Criterion 12: cosine schedule endpoints to 1e-12.
#[test]
fn criterion_12_cosine_endpoints() {
    for (lr_max, lr_min, t_max) in [(1e-3, 0.0, 100usize), (0.5, 0.1, 7), (3.5e-5, 1e-6, 1)] {
        assert!((cosine_lr(0, t_max, lr_max, lr_min) - lr_max).abs() <= 1e-12);
        assert!((cosine_lr(t_max, t_max, lr_max, lr_min) - lr_min).abs() <= 1e-12);
    }
    assert!((cosine_lr(50, 100, 1e-3, 0.0) - 5e-4).abs() <= 1e-12);
    assert!((cosine_lr(1, 2, 0.3, 0.1) - 0.2).abs() <= 1e-12);
    println!("[criterion 12] PASS - lr(0) = lr_max, lr(T) = lr_min, lr(T/2) = midpoint, to 1e-12");
}
