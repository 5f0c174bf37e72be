//! Trainable weights and their checkpoint format.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::{Layer, NetworkSpec};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"RSW1";

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

/// Per-layer weight and bias tensors keyed by layer index. Only conv2d and
/// linear layers carry parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<S> {
    layers: BTreeMap<usize, LayerParams<S>>,
}

impl<S: Scalar> Parameters<S> {
    /// Kaiming-uniform fan-in initialization for conv/linear weights and
    /// zero biases, drawn from the `(seed, "init", layer)` substream.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut layers = BTreeMap::new();
        for (idx, layer) in spec.layers.iter().enumerate() {
            let (w_shape, fan_in, out) = match layer {
                Layer::Conv2d {
                    in_ch,
                    out_ch,
                    kernel,
                    ..
                } => (
                    vec![*out_ch, *in_ch, *kernel, *kernel],
                    in_ch * kernel * kernel,
                    *out_ch,
                ),
                Layer::Linear { input, output } => (vec![*output, *input], *input, *output),
                _ => continue,
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut rng = substream(seed, "init", &[idx as u64]);
            let len: usize = w_shape.iter().product();
            let data: Vec<S> = (0..len)
                .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
                .collect();
            layers.insert(
                idx,
                LayerParams {
                    weight: Tensor::new(w_shape, data).expect("init shape"),
                    bias: Tensor::zeros(&[out]),
                },
            );
        }
        Self { layers }
    }

    pub fn get(&self, layer: usize) -> Option<&LayerParams<S>> {
        self.layers.get(&layer)
    }

    pub fn get_mut(&mut self, layer: usize) -> Option<&mut LayerParams<S>> {
        self.layers.get_mut(&layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &LayerParams<S>)> {
        self.layers.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&usize, &mut LayerParams<S>)> {
        self.layers.iter_mut()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .values()
            .all(|p| p.weight.all_finite() && p.bias.all_finite())
    }

    pub fn map_to<T: Scalar>(&self) -> Parameters<T> {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|(k, p)| {
                    (
                        *k,
                        LayerParams {
                            weight: p.weight.map_to::<T>(),
                            bias: p.bias.map_to::<T>(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Checkpoint layout: magic `RSW1`, then per layer in ascending index
    /// order: layer index (u32 LE), element count (u64 LE, weight then bias),
    /// and the raw little-endian f32 values.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for (idx, p) in &self.layers {
            out.write_all(&(*idx as u32).to_le_bytes())?;
            let count = (p.weight.len() + p.bias.len()) as u64;
            out.write_all(&count.to_le_bytes())?;
            for v in p.weight.iter().chain(p.bias.iter()) {
                out.write_all(&(v.to_f64() as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save_file(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Load a checkpoint, validating layer indices and element counts against
    /// the spec's parameter shapes.
    pub fn load<R: Read>(spec: &NetworkSpec, mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Codec(format!(
                "bad checkpoint magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let mut template = Self::init(spec, 0);
        for (idx, p) in template.layers.iter_mut() {
            let mut ibuf = [0u8; 4];
            input.read_exact(&mut ibuf)?;
            let got_idx = u32::from_le_bytes(ibuf) as usize;
            if got_idx != *idx {
                return Err(Error::Codec(format!(
                    "checkpoint layer index {got_idx}, expected {idx}"
                )));
            }
            let mut cbuf = [0u8; 8];
            input.read_exact(&mut cbuf)?;
            let count = u64::from_le_bytes(cbuf) as usize;
            let expected = p.weight.len() + p.bias.len();
            if count != expected {
                return Err(Error::Codec(format!(
                    "layer {idx}: checkpoint has {count} values, spec wants {expected}"
                )));
            }
            let mut vbuf = [0u8; 4];
            for slot in p
                .weight
                .data_mut()
                .iter_mut()
                .chain(p.bias.data_mut().iter_mut())
            {
                input.read_exact(&mut vbuf)?;
                *slot = S::from_f64(f32::from_le_bytes(vbuf) as f64);
            }
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::Codec("trailing bytes after checkpoint".into()));
        }
        Ok(template)
    }

    pub fn load_file(spec: &NetworkSpec, path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::load(spec, bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::resnet18_style;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec::new(vec![
            Layer::Linear {
                input: 4,
                output: 3,
            },
            Layer::MaskableActivation {
                site_count: None,
                replacement: Default::default(),
            },
            Layer::Linear {
                input: 3,
                output: 2,
            },
        ])
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = tiny_spec();
        let a = Parameters::<f32>::init(&spec, 42);
        let b = Parameters::<f32>::init(&spec, 42);
        assert_eq!(a, b);
        let c = Parameters::<f32>::init(&spec, 43);
        assert_ne!(a, c);

        let bound = (6.0f64 / 4.0).sqrt();
        for v in a.get(0).unwrap().weight.iter() {
            assert!((v.to_f64()).abs() <= bound);
        }
        assert!(a.get(0).unwrap().bias.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = tiny_spec();
        let p = Parameters::<f32>::init(&spec, 9);
        let mut buf = Vec::new();
        p.save(&mut buf).unwrap();
        let q = Parameters::<f32>::load(&spec, buf.as_slice()).unwrap();
        assert_eq!(p, q);

        // Corrupt the magic.
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Parameters::<f32>::load(&spec, bad.as_slice()).is_err());
    }

    #[test]
    fn resnet_param_shapes() {
        let spec = resnet18_style(10);
        let p = Parameters::<f32>::init(&spec, 1);
        // Stem conv: 64 x 3 x 3 x 3.
        assert_eq!(p.get(0).unwrap().weight.shape(), &[64, 3, 3, 3]);
        assert!(p.all_finite());
    }
}
