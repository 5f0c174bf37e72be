//! Architecture description and shape inference.
//!
//! A network is an ordered list of layer descriptors. Non-linearities only
//! ever appear as `maskable_activation` layers, so the mask's L0 norm is the
//! network's exact ReLU count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a masked-off site computes instead of `max(0, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    #[default]
    Identity,
    Poly {
        a: f64,
        b: f64,
        c: f64,
    },
}

/// Fixed-coefficient quadratic used when replacing ReLUs with a polynomial.
pub const DEFAULT_POLY: Replacement = Replacement::Poly {
    a: 0.25,
    b: 0.5,
    c: 0.0,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layer {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Linear {
        #[serde(rename = "in")]
        input: usize,
        #[serde(rename = "out")]
        output: usize,
    },
    /// ReLU sites gated by the mask. `site_count` may be omitted in spec
    /// files; inference fills it in, and a declared value is validated
    /// against the inferred count for the given input shape.
    MaskableActivation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site_count: Option<usize>,
        #[serde(default)]
        replacement: Replacement,
    },
    /// Adaptive average pooling down to a `k x k` spatial output (the input
    /// spatial dims must be divisible by `k`). This keeps one spec file valid
    /// across input resolutions, mirroring how conv nets scale.
    AvgPool {
        k: usize,
    },
    Flatten,
    ResidualBegin {
        tag: String,
    },
    ResidualAdd {
        tag: String,
    },
}

impl Layer {
    pub fn is_maskable(&self) -> bool {
        matches!(self, Layer::MaskableActivation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        validate_layer_keys(&value)?;
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serde ignores unknown fields inside internally tagged enums, so strictness
/// (no silently dropped hyperparameters) needs an explicit key check.
fn validate_layer_keys(value: &serde_json::Value) -> Result<()> {
    let layers = value
        .get("layers")
        .and_then(|l| l.as_array())
        .ok_or_else(|| Error::Config("spec JSON needs a \"layers\" array".into()))?;
    for (idx, layer) in layers.iter().enumerate() {
        let obj = layer
            .as_object()
            .ok_or_else(|| Error::Config(format!("layer {idx} is not an object")))?;
        let ty = obj
            .get("type")
            .and_then(|t| t.as_str())
            .ok_or_else(|| Error::Config(format!("layer {idx} is missing \"type\"")))?;
        let allowed: &[&str] = match ty {
            "conv2d" => &["type", "in_ch", "out_ch", "kernel", "stride", "pad"],
            "linear" => &["type", "in", "out"],
            "maskable_activation" => &["type", "site_count", "replacement"],
            "avg_pool" => &["type", "k"],
            "flatten" => &["type"],
            "residual_begin" | "residual_add" => &["type", "tag"],
            other => {
                return Err(Error::Config(format!(
                    "layer {idx} has unknown type {other:?}"
                )))
            }
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "layer {idx} ({ty}): unknown field {key:?}"
                )));
            }
        }
    }
    Ok(())
}

/// Maskable-site layout for a `(spec, input_shape)` pair: the maskable layer
/// indices in network order with their inferred element counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLayout {
    pub sites: Vec<(usize, usize)>,
}

impl MaskLayout {
    pub fn total_sites(&self) -> usize {
        self.sites.iter().map(|(_, n)| n).sum()
    }
}

fn mismatch(layer: usize, message: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        layer,
        message: message.into(),
    }
}

/// Infer every layer's output shape for the declared input shape.
///
/// Errors name the offending layer index. Also validates residual tag
/// pairing and any declared `site_count`s.
pub fn infer_shapes(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::with_capacity(spec.layers.len());
    let mut current = input_shape.to_vec();
    let mut saved: Vec<(String, Vec<usize>)> = Vec::new();

    if current.contains(&0) {
        return Err(mismatch(
            0,
            format!("input shape {current:?} has a zero dim"),
        ));
    }

    for (idx, layer) in spec.layers.iter().enumerate() {
        match layer {
            Layer::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
            } => {
                if current.len() != 3 || current[0] != *in_ch {
                    return Err(mismatch(
                        idx,
                        format!("conv2d expects [{in_ch}, H, W], got {current:?}"),
                    ));
                }
                if *kernel == 0 || *stride == 0 {
                    return Err(mismatch(idx, "conv2d kernel and stride must be positive"));
                }
                let (h, w) = (current[1], current[2]);
                let h_pad = h + 2 * pad;
                let w_pad = w + 2 * pad;
                if h_pad < *kernel || w_pad < *kernel {
                    return Err(mismatch(
                        idx,
                        format!("conv2d kernel {kernel} larger than padded input {h_pad}x{w_pad}"),
                    ));
                }
                let out_h = (h_pad - kernel) / stride + 1;
                let out_w = (w_pad - kernel) / stride + 1;
                current = vec![*out_ch, out_h, out_w];
            }
            Layer::Linear { input, output } => {
                if current.len() != 1 || current[0] != *input {
                    return Err(mismatch(
                        idx,
                        format!("linear expects [{input}], got {current:?}"),
                    ));
                }
                current = vec![*output];
            }
            Layer::MaskableActivation { site_count, .. } => {
                let n: usize = current.iter().product();
                if let Some(declared) = site_count {
                    if *declared != n {
                        return Err(mismatch(
                            idx,
                            format!("declared site_count {declared} but inferred {n}"),
                        ));
                    }
                }
            }
            Layer::AvgPool { k } => {
                if current.len() != 3 {
                    return Err(mismatch(
                        idx,
                        format!("avg_pool expects [C, H, W], got {current:?}"),
                    ));
                }
                let (c, h, w) = (current[0], current[1], current[2]);
                if *k == 0 || h % k != 0 || w % k != 0 {
                    return Err(mismatch(
                        idx,
                        format!("avg_pool to {k}x{k} needs divisible spatial dims, got {h}x{w}"),
                    ));
                }
                current = vec![c, *k, *k];
            }
            Layer::Flatten => {
                let n: usize = current.iter().product();
                current = vec![n];
            }
            Layer::ResidualBegin { tag } => {
                saved.push((tag.clone(), current.clone()));
            }
            Layer::ResidualAdd { tag } => {
                let pos = saved
                    .iter()
                    .rposition(|(t, _)| t == tag)
                    .ok_or_else(|| mismatch(idx, format!("no residual_begin with tag {tag:?}")))?;
                let (_, begin_shape) = saved.remove(pos);
                if begin_shape != current {
                    return Err(mismatch(
                        idx,
                        format!("residual_add {tag:?}: begin shape {begin_shape:?} != {current:?}"),
                    ));
                }
            }
        }
        shapes.push(current.clone());
    }
    Ok(shapes)
}

/// Maskable layout (layer index, site count) for every maskable layer.
pub fn mask_layout(spec: &NetworkSpec, input_shape: &[usize]) -> Result<MaskLayout> {
    let shapes = infer_shapes(spec, input_shape)?;
    let mut sites = Vec::new();
    for (idx, layer) in spec.layers.iter().enumerate() {
        if layer.is_maskable() {
            sites.push((idx, shapes[idx].iter().product()));
        }
    }
    Ok(MaskLayout { sites })
}

/// A ResNet18-shaped all-ReLU classifier for 3-channel square inputs.
///
/// Stem conv plus four stages of two blocks; the first block of stages 2-4
/// downsamples without a skip (no projection convs in this engine), the
/// second block of every stage is conv-act-conv-add-act. 17 activation
/// layers in total, matching the per-layer ReLU histogram of the standard
/// CIFAR ResNet18.
pub fn resnet18_style(classes: usize) -> NetworkSpec {
    let mut layers = Vec::new();
    let act = |layers: &mut Vec<Layer>| {
        layers.push(Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        })
    };
    let conv = |layers: &mut Vec<Layer>, ic: usize, oc: usize, s: usize| {
        layers.push(Layer::Conv2d {
            in_ch: ic,
            out_ch: oc,
            kernel: 3,
            stride: s,
            pad: 1,
        })
    };

    conv(&mut layers, 3, 64, 1);
    act(&mut layers);

    let widths = [64usize, 128, 256, 512];
    for (stage, &w) in widths.iter().enumerate() {
        let prev = if stage == 0 { 64 } else { widths[stage - 1] };
        let stride = if stage == 0 { 1 } else { 2 };
        // Block 1: residual only when no downsampling reshapes the skip.
        if stage == 0 {
            layers.push(Layer::ResidualBegin {
                tag: format!("s{stage}b1"),
            });
            conv(&mut layers, prev, w, stride);
            act(&mut layers);
            conv(&mut layers, w, w, 1);
            layers.push(Layer::ResidualAdd {
                tag: format!("s{stage}b1"),
            });
            act(&mut layers);
        } else {
            conv(&mut layers, prev, w, stride);
            act(&mut layers);
            conv(&mut layers, w, w, 1);
            act(&mut layers);
        }
        // Block 2: plain residual block.
        layers.push(Layer::ResidualBegin {
            tag: format!("s{stage}b2"),
        });
        conv(&mut layers, w, w, 1);
        act(&mut layers);
        conv(&mut layers, w, w, 1);
        layers.push(Layer::ResidualAdd {
            tag: format!("s{stage}b2"),
        });
        act(&mut layers);
    }

    layers.push(Layer::AvgPool { k: 1 });
    layers.push(Layer::Flatten);
    layers.push(Layer::Linear {
        input: 512,
        output: classes,
    });
    NetworkSpec::new(layers)
}

/// Small conv-plus-MLP classifier for `[1, grid, grid]` inputs (the
/// rasterized point datasets). At grid 20 it carries 3048 maskable sites:
/// a wide convolutional pool plus a narrow 48-unit head whose folds do the
/// heavy geometric lifting, so site selection genuinely matters. The grid
/// must be divisible by 4.
pub fn tiny_grid_cnn(grid: usize, classes: usize) -> NetworkSpec {
    let pooled = grid / 4;
    NetworkSpec::new(vec![
        Layer::Conv2d {
            in_ch: 1,
            out_ch: 6,
            kernel: 3,
            stride: 1,
            pad: 1,
        },
        Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        },
        Layer::Conv2d {
            in_ch: 6,
            out_ch: 6,
            kernel: 3,
            stride: 2,
            pad: 1,
        },
        Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        },
        Layer::AvgPool { k: pooled },
        Layer::Flatten,
        Layer::Linear {
            input: 6 * pooled * pooled,
            output: 48,
        },
        Layer::MaskableActivation {
            site_count: None,
            replacement: Replacement::Identity,
        },
        Layer::Linear {
            input: 48,
            output: classes,
        },
    ])
}
