//! Forward evaluation, cross-entropy loss, and reverse-mode gradients.
//!
//! Activation layers are gated: with a binary mask, bit 1 applies
//! `max(0, v)` and bit 0 applies the replacement (identity or a fixed
//! quadratic). With a soft mask the site interpolates,
//! `alpha * relu(v) + (1 - alpha) * v`, which is what the selective baseline
//! trains through.
//!
//! Everything here is read-only in the parameters and masks, so evaluation
//! can run from several workers at once; batching is sequential per sample to
//! keep reductions in a fixed order.

use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mask::ReluMask;
use crate::net::{Layer, NetworkSpec, Replacement};
use crate::params::{LayerParams, Parameters};
use crate::scalar::Scalar;
use crate::snl::SoftMask;
use crate::tensor::Tensor;

/// How maskable sites are gated during a pass.
#[derive(Clone, Copy)]
pub enum Gate<'a, S> {
    Binary(&'a ReluMask),
    Soft(&'a SoftMask<S>),
}

/// Per-pass cache: the input to every layer, for the reverse sweep.
struct Trace<S> {
    layer_inputs: Vec<Tensor<S>>,
}

/// Gradients of the loss w.r.t. parameters, plus (for soft gates) w.r.t. the
/// per-site mask values.
pub struct Gradients<S> {
    pub layers: BTreeMap<usize, LayerParams<S>>,
    pub alpha: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    fn zeros_like(params: &Parameters<S>) -> Self {
        let layers = params
            .iter()
            .map(|(idx, p)| {
                (
                    *idx,
                    LayerParams {
                        weight: Tensor::zeros(p.weight.shape()),
                        bias: Tensor::zeros(p.bias.shape()),
                    },
                )
            })
            .collect();
        Self {
            layers,
            alpha: None,
        }
    }

    pub fn accumulate(&mut self, other: &Gradients<S>) {
        for (idx, g) in self.layers.iter_mut() {
            let o = &other.layers[idx];
            for (a, b) in g.weight.data_mut().iter_mut().zip(o.weight.iter()) {
                *a += *b;
            }
            for (a, b) in g.bias.data_mut().iter_mut().zip(o.bias.iter()) {
                *a += *b;
            }
        }
        if let (Some(mine), Some(theirs)) = (self.alpha.as_mut(), other.alpha.as_ref()) {
            for (la, lb) in mine.iter_mut().zip(theirs.iter()) {
                for (a, b) in la.iter_mut().zip(lb.iter()) {
                    *a += *b;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for g in self.layers.values_mut() {
            for v in g.weight.data_mut().iter_mut() {
                *v *= factor;
            }
            for v in g.bias.data_mut().iter_mut() {
                *v *= factor;
            }
        }
        if let Some(alpha) = self.alpha.as_mut() {
            for layer in alpha.iter_mut() {
                for v in layer.iter_mut() {
                    *v *= factor;
                }
            }
        }
    }
}

fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

fn forward_layer<S: Scalar>(
    layer: &Layer,
    layer_idx: usize,
    mask_layer: usize,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    input: &Tensor<S>,
    saved: &mut HashMap<String, Tensor<S>>,
) -> Result<Tensor<S>> {
    match layer {
        Layer::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        } => {
            let p = params.get(layer_idx).ok_or_else(|| {
                Error::Config(format!("missing parameters for layer {layer_idx}"))
            })?;
            let (h, w) = (input.shape()[1], input.shape()[2]);
            let out_h = conv_out_dim(h, *kernel, *stride, *pad);
            let out_w = conv_out_dim(w, *kernel, *stride, *pad);
            let mut out = Tensor::zeros(&[*out_ch, out_h, out_w]);
            let x = input.data();
            let wt = p.weight.data();
            let bias = p.bias.data();
            let out_data = out.data_mut();
            // Accumulate one (oc, ic, ky) weight row at a time over sliced
            // input rows; the interior fast path runs without bounds checks.
            for oc in 0..*out_ch {
                let o_plane = &mut out_data[oc * out_h * out_w..][..out_h * out_w];
                for v in o_plane.iter_mut() {
                    *v = bias[oc];
                }
                for ic in 0..*in_ch {
                    let x_plane = &x[ic * h * w..][..h * w];
                    let w_base = ((oc * in_ch + ic) * kernel) * kernel;
                    for ky in 0..*kernel {
                        let w_row = &wt[w_base + ky * kernel..][..*kernel];
                        for oy in 0..out_h {
                            let iy = (oy * stride + ky) as isize - *pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let x_row = &x_plane[iy as usize * w..][..w];
                            let o_row = &mut o_plane[oy * out_w..][..out_w];
                            if *stride == 1 {
                                // Unit stride: each weight tap is an axpy
                                // over the row.
                                for (kx, wv) in w_row.iter().enumerate() {
                                    let ox_lo = pad.saturating_sub(kx);
                                    let hi = (w + pad).saturating_sub(kx).min(out_w);
                                    if ox_lo >= hi {
                                        continue;
                                    }
                                    let len = hi - ox_lo;
                                    let ix_lo = ox_lo + kx - pad;
                                    for (o, xv) in
                                        o_row[ox_lo..][..len].iter_mut().zip(&x_row[ix_lo..][..len])
                                    {
                                        *o += *wv * *xv;
                                    }
                                }
                            } else {
                                for (ox, o) in o_row.iter_mut().enumerate() {
                                    let base = ox * stride;
                                    let mut acc = S::ZERO;
                                    if base >= *pad && base - pad + kernel <= w {
                                        for (xv, wv) in
                                            x_row[base - pad..][..*kernel].iter().zip(w_row)
                                        {
                                            acc += *xv * *wv;
                                        }
                                    } else {
                                        for (kx, wv) in w_row.iter().enumerate() {
                                            let ix = (base + kx) as isize - *pad as isize;
                                            if ix >= 0 && (ix as usize) < w {
                                                acc += x_row[ix as usize] * *wv;
                                            }
                                        }
                                    }
                                    *o += acc;
                                }
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
        Layer::Linear {
            input: n_in,
            output,
        } => {
            let p = params.get(layer_idx).ok_or_else(|| {
                Error::Config(format!("missing parameters for layer {layer_idx}"))
            })?;
            let x = input.data();
            let wt = p.weight.data();
            let mut out = Tensor::zeros(&[*output]);
            let out_data = out.data_mut();
            for (o, slot) in out_data.iter_mut().enumerate() {
                let mut acc = p.bias.data()[o];
                let row = &wt[o * n_in..(o + 1) * n_in];
                for (xv, wv) in x.iter().zip(row.iter()) {
                    acc += *xv * *wv;
                }
                *slot = acc;
            }
            Ok(out)
        }
        Layer::MaskableActivation { replacement, .. } => {
            let mut out = input.clone();
            match gate {
                Gate::Binary(mask) => {
                    for (site, v) in out.data_mut().iter_mut().enumerate() {
                        if mask.get(mask_layer, site) {
                            *v = v.maximum(S::ZERO);
                        } else {
                            *v = apply_replacement(*replacement, *v);
                        }
                    }
                }
                Gate::Soft(alpha) => {
                    for (site, v) in out.data_mut().iter_mut().enumerate() {
                        let a = alpha.get(mask_layer, site);
                        let relu = v.maximum(S::ZERO);
                        *v = a * relu + (S::ONE - a) * *v;
                    }
                }
            }
            Ok(out)
        }
        Layer::AvgPool { k } => {
            let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
            let (rh, rw) = (h / k, w / k);
            let norm = S::from_f64(1.0 / (rh * rw) as f64);
            let mut out = Tensor::zeros(&[c, *k, *k]);
            let x = input.data();
            let out_data = out.data_mut();
            for ch in 0..c {
                for oy in 0..*k {
                    for ox in 0..*k {
                        let mut acc = S::ZERO;
                        for iy in oy * rh..(oy + 1) * rh {
                            for ix in ox * rw..(ox + 1) * rw {
                                acc += x[(ch * h + iy) * w + ix];
                            }
                        }
                        out_data[(ch * k + oy) * k + ox] = acc * norm;
                    }
                }
            }
            Ok(out)
        }
        Layer::Flatten => {
            let n = input.len();
            input.clone().reshaped(vec![n])
        }
        Layer::ResidualBegin { tag } => {
            saved.insert(tag.clone(), input.clone());
            Ok(input.clone())
        }
        Layer::ResidualAdd { tag } => {
            let begin = saved
                .remove(tag)
                .ok_or_else(|| Error::Config(format!("residual_add {tag:?} without begin")))?;
            let mut out = input.clone();
            for (o, b) in out.data_mut().iter_mut().zip(begin.iter()) {
                *o += *b;
            }
            Ok(out)
        }
    }
}

fn apply_replacement<S: Scalar>(r: Replacement, v: S) -> S {
    match r {
        Replacement::Identity => v,
        Replacement::Poly { a, b, c } => {
            S::from_f64(a) * v * v + S::from_f64(b) * v + S::from_f64(c)
        }
    }
}

fn replacement_derivative<S: Scalar>(r: Replacement, v: S) -> S {
    match r {
        Replacement::Identity => S::ONE,
        Replacement::Poly { a, b, .. } => S::from_f64(2.0 * a) * v + S::from_f64(b),
    }
}

fn forward_traced<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    x: &Tensor<S>,
    keep_trace: bool,
    validate: bool,
) -> Result<(Tensor<S>, Option<Trace<S>>)> {
    if validate {
        check_gate_shape(spec, gate, x.shape())?;
    }
    let mut saved = HashMap::new();
    let mut current = x.clone();
    let mut inputs = if keep_trace {
        Vec::with_capacity(spec.layers.len())
    } else {
        Vec::new()
    };
    let mut mask_layer = 0usize;
    for (idx, layer) in spec.layers.iter().enumerate() {
        if keep_trace {
            inputs.push(current.clone());
        }
        let next = forward_layer(layer, idx, mask_layer, params, gate, &current, &mut saved)?;
        if layer.is_maskable() {
            mask_layer += 1;
        }
        current = next;
    }
    debug_assert!(current.all_finite(), "non-finite activations in forward");
    let trace = keep_trace.then_some(Trace {
        layer_inputs: inputs,
    });
    Ok((current, trace))
}

fn check_gate_shape<S: Scalar>(
    spec: &NetworkSpec,
    gate: &Gate<'_, S>,
    input_shape: &[usize],
) -> Result<()> {
    let layout = crate::net::mask_layout(spec, input_shape)?;
    let (layer_count, sites): (usize, Vec<usize>) = match gate {
        Gate::Binary(m) => (
            m.layer_count(),
            (0..m.layer_count()).map(|i| m.layer_sites(i)).collect(),
        ),
        Gate::Soft(a) => (
            a.layer_count(),
            (0..a.layer_count()).map(|i| a.layer_sites(i)).collect(),
        ),
    };
    if layer_count != layout.sites.len() {
        return Err(Error::Mask(format!(
            "mask has {layer_count} layers, spec has {}",
            layout.sites.len()
        )));
    }
    for (i, ((_, want), got)) in layout.sites.iter().zip(sites.iter()).enumerate() {
        if want != got {
            return Err(Error::Mask(format!(
                "mask layer {i} has {got} sites, spec wants {want}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn validate_gate<S: Scalar>(
    spec: &NetworkSpec,
    gate: &Gate<'_, S>,
    input_shape: &[usize],
) -> Result<()> {
    check_gate_shape(spec, gate, input_shape)
}

/// Run the network with a binary mask; returns the logits.
pub fn forward<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    x: &Tensor<S>,
) -> Result<Tensor<S>> {
    forward_traced(spec, params, &Gate::Binary(mask), x, false, true).map(|(logits, _)| logits)
}

/// Run the network with a soft mask.
pub fn soft_forward<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    alpha: &SoftMask<S>,
    x: &Tensor<S>,
) -> Result<Tensor<S>> {
    forward_traced(spec, params, &Gate::Soft(alpha), x, false, true).map(|(logits, _)| logits)
}

/// The tensor feeding each maskable activation layer, in mask-layer order.
/// Useful for inspecting pre-activation distributions (and for keeping
/// finite-difference checks away from the ReLU kink).
pub fn maskable_inputs<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    x: &Tensor<S>,
) -> Result<Vec<Tensor<S>>> {
    let (_, trace) = forward_traced(spec, params, gate, x, true, true)?;
    let trace = trace.expect("trace requested");
    Ok(spec
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_maskable())
        .map(|(i, _)| trace.layer_inputs[i].clone())
        .collect())
}

/// Softmax cross-entropy with max-subtraction for stability.
pub fn loss_ce<S: Scalar>(logits: &Tensor<S>, label: usize) -> Result<S> {
    let k = logits.len();
    if label >= k {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let max = logits
        .iter()
        .fold(S::from_f64(f64::NEG_INFINITY), |m, &v| m.maximum(v));
    let mut sum = S::ZERO;
    for &v in logits.iter() {
        sum += (v - max).exp();
    }
    Ok(sum.ln() - (logits.data()[label] - max))
}

/// d loss / d logits: `softmax(logits) - onehot(label)`.
fn loss_ce_grad<S: Scalar>(logits: &Tensor<S>, label: usize) -> Result<Tensor<S>> {
    let k = logits.len();
    if label >= k {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let max = logits
        .iter()
        .fold(S::from_f64(f64::NEG_INFINITY), |m, &v| m.maximum(v));
    let mut grad = Tensor::zeros(&[k]);
    let mut sum = S::ZERO;
    for (g, &v) in grad.data_mut().iter_mut().zip(logits.iter()) {
        *g = (v - max).exp();
        sum += *g;
    }
    for g in grad.data_mut().iter_mut() {
        *g /= sum;
    }
    grad.data_mut()[label] -= S::ONE;
    Ok(grad)
}

/// Reverse-mode gradients of `loss_ce(forward(x), label)` w.r.t. parameters
/// and, when `want_alpha` and the gate is soft, w.r.t. the mask values.
pub fn backward<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    x: &Tensor<S>,
    label: usize,
    want_alpha: bool,
) -> Result<(S, Gradients<S>)> {
    check_gate_shape(spec, gate, x.shape())?;
    backward_prevalidated(spec, params, gate, x, label, want_alpha)
}

/// [`backward`] without the gate-shape validation, for dataset loops that
/// have already checked it once.
pub(crate) fn backward_prevalidated<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    gate: &Gate<'_, S>,
    x: &Tensor<S>,
    label: usize,
    want_alpha: bool,
) -> Result<(S, Gradients<S>)> {
    let (logits, trace) = forward_traced(spec, params, gate, x, true, false)?;
    let trace = trace.expect("trace requested");
    let loss = loss_ce(&logits, label)?;
    let mut grads = Gradients::zeros_like(params);
    if want_alpha {
        if let Gate::Soft(alpha) = gate {
            grads.alpha = Some(
                (0..alpha.layer_count())
                    .map(|i| vec![S::ZERO; alpha.layer_sites(i)])
                    .collect(),
            );
        }
    }

    let mask_layer_of: Vec<usize> = {
        let mut v = Vec::with_capacity(spec.layers.len());
        let mut ml = 0usize;
        for layer in &spec.layers {
            v.push(ml);
            if layer.is_maskable() {
                ml += 1;
            }
        }
        v
    };

    // Residual bookkeeping for the reverse sweep: gradient queued for each
    // begin tag by the matching add.
    let mut residual_grads: HashMap<String, Tensor<S>> = HashMap::new();

    let mut grad = loss_ce_grad(&logits, label)?;
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let input = &trace.layer_inputs[idx];
        grad = match layer {
            Layer::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
            } => {
                let p = params.get(idx).expect("conv params");
                let g = grads.layers.get_mut(&idx).expect("conv grads");
                let (h, w) = (input.shape()[1], input.shape()[2]);
                let out_h = conv_out_dim(h, *kernel, *stride, *pad);
                let out_w = conv_out_dim(w, *kernel, *stride, *pad);
                let mut dx = Tensor::zeros(&[*in_ch, h, w]);
                let x_data = input.data();
                let w_data = p.weight.data();
                let go = grad.data();
                let gw = g.weight.data_mut();
                let gb = g.bias.data_mut();
                let dx_data = dx.data_mut();
                for oc in 0..*out_ch {
                    let go_plane = &go[oc * out_h * out_w..][..out_h * out_w];
                    for gv in go_plane {
                        gb[oc] += *gv;
                    }
                    for ic in 0..*in_ch {
                        let w_base = ((oc * in_ch + ic) * kernel) * kernel;
                        for ky in 0..*kernel {
                            let w_row = &w_data[w_base + ky * kernel..][..*kernel];
                            let gw_row = &mut gw[w_base + ky * kernel..][..*kernel];
                            for oy in 0..out_h {
                                let iy = (oy * stride + ky) as isize - *pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let row_off = (ic * h + iy as usize) * w;
                                let x_row = &x_data[row_off..][..w];
                                let dx_row = &mut dx_data[row_off..][..w];
                                let go_row = &go_plane[oy * out_w..][..out_w];
                                if *stride == 1 {
                                    for (kx, wv) in w_row.iter().enumerate() {
                                        let ox_lo = pad.saturating_sub(kx);
                                        let hi = (w + pad).saturating_sub(kx).min(out_w);
                                        if ox_lo >= hi {
                                            continue;
                                        }
                                        let len = hi - ox_lo;
                                        let ix_lo = ox_lo + kx - pad;
                                        let gs = &go_row[ox_lo..][..len];
                                        let xs = &x_row[ix_lo..][..len];
                                        let ds = &mut dx_row[ix_lo..][..len];
                                        let mut gw_acc = S::ZERO;
                                        for i in 0..len {
                                            gw_acc += gs[i] * xs[i];
                                            ds[i] += gs[i] * *wv;
                                        }
                                        gw_row[kx] += gw_acc;
                                    }
                                } else {
                                    for (ox, gv) in go_row.iter().enumerate() {
                                        let base = ox * stride;
                                        if base >= *pad && base - pad + kernel <= w {
                                            let xs = &x_row[base - pad..][..*kernel];
                                            let ds = &mut dx_row[base - pad..][..*kernel];
                                            for kx in 0..*kernel {
                                                gw_row[kx] += *gv * xs[kx];
                                                ds[kx] += *gv * w_row[kx];
                                            }
                                        } else {
                                            for kx in 0..*kernel {
                                                let ix = (base + kx) as isize - *pad as isize;
                                                if ix >= 0 && (ix as usize) < w {
                                                    gw_row[kx] += *gv * x_row[ix as usize];
                                                    dx_row[ix as usize] += *gv * w_row[kx];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            Layer::Linear {
                input: n_in,
                output,
            } => {
                let p = params.get(idx).expect("linear params");
                let g = grads.layers.get_mut(&idx).expect("linear grads");
                let mut dx = Tensor::zeros(&[*n_in]);
                let x_data = input.data();
                let w_data = p.weight.data();
                let go = grad.data();
                let gw = g.weight.data_mut();
                let dx_data = dx.data_mut();
                for o in 0..*output {
                    let gv = go[o];
                    g.bias.data_mut()[o] += gv;
                    let row = &w_data[o * n_in..(o + 1) * n_in];
                    let grow = &mut gw[o * n_in..(o + 1) * n_in];
                    for i in 0..*n_in {
                        grow[i] += gv * x_data[i];
                        dx_data[i] += gv * row[i];
                    }
                }
                dx
            }
            Layer::MaskableActivation { replacement, .. } => {
                let ml = mask_layer_of[idx];
                let mut dx = grad.clone();
                match gate {
                    Gate::Binary(mask) => {
                        for (site, (dv, &v)) in
                            dx.data_mut().iter_mut().zip(input.iter()).enumerate()
                        {
                            if mask.get(ml, site) {
                                if v <= S::ZERO {
                                    *dv = S::ZERO;
                                }
                            } else {
                                *dv *= replacement_derivative(*replacement, v);
                            }
                        }
                    }
                    Gate::Soft(alpha) => {
                        for (site, (dv, &v)) in
                            dx.data_mut().iter_mut().zip(input.iter()).enumerate()
                        {
                            let a = alpha.get(ml, site);
                            let relu = v.maximum(S::ZERO);
                            if let Some(ga) = grads.alpha.as_mut() {
                                ga[ml][site] += *dv * (relu - v);
                            }
                            let dgate = if v > S::ZERO { S::ONE } else { S::ONE - a };
                            *dv *= dgate;
                        }
                    }
                }
                dx
            }
            Layer::AvgPool { k } => {
                let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
                let (rh, rw) = (h / k, w / k);
                let norm = S::from_f64(1.0 / (rh * rw) as f64);
                let mut dx = Tensor::zeros(&[c, h, w]);
                let go = grad.data();
                let dx_data = dx.data_mut();
                for ch in 0..c {
                    for oy in 0..*k {
                        for ox in 0..*k {
                            let gv = go[(ch * k + oy) * k + ox] * norm;
                            for iy in oy * rh..(oy + 1) * rh {
                                for ix in ox * rw..(ox + 1) * rw {
                                    dx_data[(ch * h + iy) * w + ix] += gv;
                                }
                            }
                        }
                    }
                }
                dx
            }
            Layer::Flatten => grad.reshaped(input.shape().to_vec())?,
            Layer::ResidualBegin { tag } => {
                let mut dx = grad;
                if let Some(extra) = residual_grads.remove(tag) {
                    for (a, b) in dx.data_mut().iter_mut().zip(extra.iter()) {
                        *a += *b;
                    }
                }
                dx
            }
            Layer::ResidualAdd { tag } => {
                residual_grads.insert(tag.clone(), grad.clone());
                grad
            }
        };
    }
    Ok((loss, grads))
}

/// Fraction of samples classified correctly, in percent. Ties in the argmax
/// go to the lowest class index.
pub fn evaluate_accuracy<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    dataset: &Dataset<S>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gate = Gate::Binary(mask);
    check_gate_shape(spec, &gate, dataset.sample_shape())?;
    let mut correct = 0usize;
    for i in 0..dataset.len() {
        let x = dataset.sample(i);
        let (logits, _) = forward_traced(spec, params, &gate, &x, false, false)?;
        if logits.argmax() == dataset.labels[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / dataset.len() as f64)
}

/// Mean cross-entropy of the binary-masked network over a dataset.
pub fn mean_loss<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    mask: &ReluMask,
    dataset: &Dataset<S>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gate = Gate::Binary(mask);
    check_gate_shape(spec, &gate, dataset.sample_shape())?;
    let mut total = 0.0f64;
    for i in 0..dataset.len() {
        let x = dataset.sample(i);
        let (logits, _) = forward_traced(spec, params, &gate, &x, false, false)?;
        total += loss_ce(&logits, dataset.labels[i])?.to_f64();
    }
    Ok(total / dataset.len() as f64)
}

/// Accuracy of the soft-gated network, used right before binarization.
pub fn evaluate_soft_accuracy<S: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<S>,
    alpha: &SoftMask<S>,
    dataset: &Dataset<S>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gate = Gate::Soft(alpha);
    check_gate_shape(spec, &gate, dataset.sample_shape())?;
    let mut correct = 0usize;
    for i in 0..dataset.len() {
        let x = dataset.sample(i);
        let (logits, _) = forward_traced(spec, params, &gate, &x, false, false)?;
        if logits.argmax() == dataset.labels[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / dataset.len() as f64)
}
