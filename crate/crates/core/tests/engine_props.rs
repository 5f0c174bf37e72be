//! Semantic properties of the masked engine: what the mask means, what the
//! accuracy counter counts, and bitwise determinism.

use rand::Rng;
use relu_sculpt_core::data::gen_blobs;
use relu_sculpt_core::engine::{evaluate_accuracy, forward, loss_ce};
use relu_sculpt_core::mask::ReluMask;
use relu_sculpt_core::net::{Layer, NetworkSpec, Replacement};
use relu_sculpt_core::params::Parameters;
use relu_sculpt_core::rng::substream;
use relu_sculpt_core::tensor::Tensor;

fn conv_net() -> (NetworkSpec, Vec<usize>) {
    (
        NetworkSpec::new(vec![
            Layer::Conv2d {
                in_ch: 1,
                out_ch: 4,
                kernel: 3,
                stride: 1,
                pad: 1,
            },
            Layer::MaskableActivation {
                site_count: None,
                replacement: Replacement::Identity,
            },
            Layer::ResidualBegin { tag: "r".into() },
            Layer::Conv2d {
                in_ch: 4,
                out_ch: 4,
                kernel: 3,
                stride: 1,
                pad: 1,
            },
            Layer::ResidualAdd { tag: "r".into() },
            Layer::MaskableActivation {
                site_count: None,
                replacement: Replacement::Identity,
            },
            Layer::AvgPool { k: 2 },
            Layer::Flatten,
            Layer::Linear {
                input: 16,
                output: 3,
            },
        ]),
        vec![1, 4, 4],
    )
}

fn random_x(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let mut rng = substream(seed, "x", &[]);
    let len: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// With the all-zeros mask and identity replacement every layer is affine,
/// so f(x1) + f(x2) - f(0) = f(x1 + x2).
#[test]
fn all_zeros_identity_mask_is_affine() {
    let (spec, shape) = conv_net();
    let params = Parameters::<f64>::init(&spec, 11);
    let zeros = ReluMask::all_zeros(&spec, &shape).unwrap();

    let x1 = random_x(1, &shape);
    let x2 = random_x(2, &shape);
    let zero = Tensor::<f64>::zeros(&shape);
    let sum = Tensor::new(
        shape.clone(),
        x1.iter().zip(x2.iter()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();

    let f = |x: &Tensor<f64>| forward(&spec, &params, &zeros, x).unwrap();
    let lhs: Vec<f64> = f(&x1)
        .iter()
        .zip(f(&x2).iter())
        .zip(f(&zero).iter())
        .map(|((a, b), c)| a + b - c)
        .collect();
    let rhs = f(&sum);
    for (l, r) in lhs.iter().zip(rhs.iter()) {
        let rel = (l - r).abs() / 1.0f64.max(l.abs()).max(r.abs());
        assert!(rel <= 1e-5, "affinity violated: {l} vs {r}");
    }

    // The all-ones mask, by contrast, is genuinely nonlinear: the same
    // probe must fail for some input pair.
    let ones = ReluMask::all_ones(&spec, &shape).unwrap();
    let g = |x: &Tensor<f64>| forward(&spec, &params, &ones, x).unwrap();
    let mut violated = false;
    for seed in 0..16 {
        let a = random_x(100 + seed, &shape);
        let b = random_x(200 + seed, &shape);
        let s = Tensor::new(
            shape.clone(),
            a.iter().zip(b.iter()).map(|(p, q)| p + q).collect(),
        )
        .unwrap();
        let lhs: Vec<f64> = g(&a)
            .iter()
            .zip(g(&b).iter())
            .zip(g(&zero).iter())
            .map(|((p, q), r)| p + q - r)
            .collect();
        let rhs = g(&s);
        if lhs
            .iter()
            .zip(rhs.iter())
            .any(|(l, r)| (l - r).abs() / 1.0f64.max(l.abs()).max(r.abs()) > 1e-5)
        {
            violated = true;
            break;
        }
    }
    assert!(violated, "ReLU net unexpectedly affine");
}

/// All-ones mask computes exactly the plain-ReLU network: flipping any
/// single bit to zero (identity) changes some output for inputs that drive
/// that site negative.
#[test]
fn all_ones_equals_plain_relu() {
    let spec = NetworkSpec::new(vec![Layer::MaskableActivation {
        site_count: None,
        replacement: Replacement::Identity,
    }]);
    let params = Parameters::<f64>::init(&spec, 0);
    let ones = ReluMask::all_ones(&spec, &[4]).unwrap();
    let x = Tensor::new(vec![4], vec![-2.0, -0.5, 0.5, 2.0]).unwrap();
    let y = forward(&spec, &params, &ones, &x).unwrap();
    assert_eq!(y.data(), &[0.0, 0.0, 0.5, 2.0]);
}

#[test]
fn forward_is_bitwise_deterministic() {
    let (spec, shape) = conv_net();
    let params = Parameters::<f32>::init(&spec, 3);
    let mask = ReluMask::all_ones(&spec, &shape).unwrap();
    let x = random_x(9, &shape).map_to::<f32>();

    let y1 = forward(&spec, &params, &mask, &x).unwrap();
    let y2 = forward(&spec, &params, &mask, &x).unwrap();
    let b1: Vec<u32> = y1.iter().map(|v| v.to_bits()).collect();
    let b2: Vec<u32> = y2.iter().map(|v| v.to_bits()).collect();
    assert_eq!(b1, b2);
}

/// evaluate_accuracy against an independent per-sample argmax count, on a
/// 64-sample training set.
#[test]
fn accuracy_matches_manual_count() {
    let (spec, shape) = conv_net();
    let blobs = gen_blobs::<f64>(2, 32, 16, 4.0, 21).unwrap();
    let images = Tensor::new(vec![64, 1, 4, 4], blobs.images.data().to_vec()).unwrap();
    let ds = relu_sculpt_core::data::Dataset::new(images, blobs.labels.clone(), 2).unwrap();

    let params = Parameters::<f64>::init(&spec, 5);
    let mask = ReluMask::all_ones(&spec, &shape).unwrap();

    let mut manual = 0usize;
    for i in 0..ds.len() {
        let logits = forward(&spec, &params, &mask, &ds.sample(i)).unwrap();
        // Independent argmax with lowest-index tie-breaking.
        let mut best = 0usize;
        for k in 1..logits.len() {
            if logits.data()[k] > logits.data()[best] {
                best = k;
            }
        }
        if best == ds.labels[i] {
            manual += 1;
        }
    }
    let expected = 100.0 * manual as f64 / ds.len() as f64;
    let got = evaluate_accuracy(&spec, &params, &mask, &ds).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn constant_output_accuracy() {
    // Zeroed network predicts class 0 everywhere (argmax tie at lowest).
    let spec = NetworkSpec::new(vec![
        Layer::Flatten,
        Layer::Linear {
            input: 2,
            output: 2,
        },
    ]);
    let mut params = Parameters::<f64>::init(&spec, 0);
    for (_, p) in params.iter_mut() {
        for v in p.weight.data_mut() {
            *v = 0.0;
        }
    }
    let mask = ReluMask::all_ones(&spec, &[2, 1, 1]).unwrap();

    let single = gen_blobs::<f64>(2, 4, 2, 3.0, 1).unwrap();
    let only_zero = {
        let idx: Vec<usize> = (0..single.len())
            .filter(|&i| single.labels[i] == 0)
            .collect();
        let mut data = Vec::new();
        for &i in &idx {
            data.extend_from_slice(single.sample(i).data());
        }
        relu_sculpt_core::data::Dataset::new(
            Tensor::new(vec![idx.len(), 2, 1, 1], data).unwrap(),
            vec![0; idx.len()],
            2,
        )
        .unwrap()
    };
    assert_eq!(
        evaluate_accuracy(&spec, &params, &mask, &only_zero).unwrap(),
        100.0
    );
    assert_eq!(
        evaluate_accuracy(&spec, &params, &mask, &single).unwrap(),
        50.0
    );
}

#[test]
fn loss_is_finite_on_extreme_logits() {
    let logits = Tensor::new(vec![3], vec![1e4f64, -1e4, 0.0]).unwrap();
    let l = loss_ce(&logits, 1).unwrap();
    assert!(l.is_finite());
}
