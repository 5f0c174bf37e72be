//! Central finite-difference verification of analytic gradients.
//!
//! Deliberately built on nothing but `forward`/`soft_forward` and the loss,
//! so it stays an independent check on the reverse-mode path. Run in double
//! precision; the default step is 1e-5.

use crate::engine::{backward, loss_ce, soft_forward, Gate};
use crate::error::Result;
use crate::mask::ReluMask;
use crate::net::NetworkSpec;
use crate::params::Parameters;
use crate::snl::SoftMask;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Worst relative error between analytic and central-difference gradients,
/// over every weight and bias entry, under either gate kind.
pub fn max_param_grad_error_gated(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    gate: &Gate<'_, f64>,
    x: &Tensor<f64>,
    label: usize,
    h: f64,
) -> Result<f64> {
    let (_, grads) = backward(spec, params, gate, x, label, false)?;
    let forward_loss = |probe: &Parameters<f64>| -> Result<f64> {
        let logits = match gate {
            Gate::Binary(mask) => crate::engine::forward(spec, probe, mask, x)?,
            Gate::Soft(alpha) => soft_forward(spec, probe, alpha, x)?,
        };
        loss_ce(&logits, label)
    };
    let mut worst = 0.0f64;
    let layer_indices: Vec<usize> = params.iter().map(|(i, _)| *i).collect();
    for idx in layer_indices {
        for field in [true, false] {
            let len = {
                let p = params.get(idx).unwrap();
                if field {
                    p.weight.len()
                } else {
                    p.bias.len()
                }
            };
            for slot in 0..len {
                let mut probe = params.clone();
                let mut eval = |delta: f64| -> Result<f64> {
                    {
                        let p = probe.get_mut(idx).unwrap();
                        let data = if field {
                            p.weight.data_mut()
                        } else {
                            p.bias.data_mut()
                        };
                        data[slot] += delta;
                    }
                    let loss = forward_loss(&probe)?;
                    {
                        let p = probe.get_mut(idx).unwrap();
                        let data = if field {
                            p.weight.data_mut()
                        } else {
                            p.bias.data_mut()
                        };
                        data[slot] -= delta;
                    }
                    Ok(loss)
                };
                let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
                let analytic = {
                    let g = &grads.layers[&idx];
                    if field {
                        g.weight.data()[slot]
                    } else {
                        g.bias.data()[slot]
                    }
                };
                worst = worst.max(relative_error(analytic, numeric));
            }
        }
    }
    Ok(worst)
}

/// [`max_param_grad_error_gated`] specialized to a binary mask.
pub fn max_param_grad_error(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    mask: &ReluMask,
    x: &Tensor<f64>,
    label: usize,
    h: f64,
) -> Result<f64> {
    max_param_grad_error_gated(spec, params, &Gate::Binary(mask), x, label, h)
}

/// Worst relative error of the soft-mask gradient at interior alpha values.
pub fn max_alpha_grad_error(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    alpha: &SoftMask<f64>,
    x: &Tensor<f64>,
    label: usize,
    lambda: f64,
    h: f64,
) -> Result<f64> {
    let (_, grads) = backward(spec, params, &Gate::Soft(alpha), x, label, true)?;
    let analytic = grads.alpha.expect("alpha gradients");
    let mut worst = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for li in 0..alpha.layer_count() {
        for site in 0..alpha.layer_sites(li) {
            let numeric = {
                let eval = |delta: f64| -> Result<f64> {
                    let mut probe = alpha.clone();
                    probe.layers_mut()[li][site] += delta;
                    let logits = soft_forward(spec, params, &probe, x)?;
                    Ok(loss_ce(&logits, label)? + lambda * probe.l1())
                };
                (eval(h)? - eval(-h)?) / (2.0 * h)
            };
            let a = analytic[li][site] + lambda;
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

/// `|a - b| / max(1, |a|, |b|)`: absolute near zero, relative elsewhere.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}
