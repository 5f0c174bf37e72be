//! Binary ReLU masks: one bit per activation element, removal algebra,
//! overlap scoring, and a bit-exact binary codec.
//!
//! Masks are immutable values; every operation returns a new mask.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{mask_layout, NetworkSpec};

const MAGIC: &[u8; 5] = b"RMSK1";

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitLayer {
    layer_index: usize,
    site_count: usize,
    /// Packed LSB-first: site `i` lives at bit `i % 8` of byte `i / 8`.
    /// Padding bits beyond `site_count` are always zero.
    bytes: Vec<u8>,
}

impl BitLayer {
    fn zeros(layer_index: usize, site_count: usize) -> Self {
        Self {
            layer_index,
            site_count,
            bytes: vec![0u8; site_count.div_ceil(8)],
        }
    }

    fn ones(layer_index: usize, site_count: usize) -> Self {
        let mut l = Self::zeros(layer_index, site_count);
        for b in l.bytes.iter_mut() {
            *b = 0xff;
        }
        l.clear_padding();
        l
    }

    fn clear_padding(&mut self) {
        let tail = self.site_count % 8;
        if tail != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << tail) - 1;
            }
        }
    }

    #[inline]
    fn get(&self, site: usize) -> bool {
        (self.bytes[site / 8] >> (site % 8)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, site: usize, on: bool) {
        let byte = &mut self.bytes[site / 8];
        if on {
            *byte |= 1 << (site % 8);
        } else {
            *byte &= !(1 << (site % 8));
        }
    }

    fn popcount(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }
}

/// A binary activation mask with its L0 budget cached; `l0()` is always the
/// true popcount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluMask {
    layers: Vec<BitLayer>,
    cached_l0: usize,
}

/// Distinct `(layer index, site index)` pairs slated for removal, held in
/// canonical sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalSet {
    pub sites: Vec<(usize, usize)>,
}

impl RemovalSet {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

impl ReluMask {
    /// All-ones mask for the architecture; its L0 is the total ReLU count.
    pub fn all_ones(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Self> {
        let layout = mask_layout(spec, input_shape)?;
        let layers: Vec<BitLayer> = layout
            .sites
            .iter()
            .map(|&(idx, n)| BitLayer::ones(idx, n))
            .collect();
        let cached_l0 = layers.iter().map(BitLayer::popcount).sum();
        Ok(Self { layers, cached_l0 })
    }

    pub fn all_zeros(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Self> {
        let layout = mask_layout(spec, input_shape)?;
        let layers: Vec<BitLayer> = layout
            .sites
            .iter()
            .map(|&(idx, n)| BitLayer::zeros(idx, n))
            .collect();
        Ok(Self {
            layers,
            cached_l0: 0,
        })
    }

    /// Build from explicit per-layer bit vectors (mask layer order).
    pub fn from_bits(site_layers: &[(usize, Vec<bool>)]) -> Self {
        let mut layers = Vec::with_capacity(site_layers.len());
        for (layer_index, bits) in site_layers {
            let mut l = BitLayer::zeros(*layer_index, bits.len());
            for (i, &b) in bits.iter().enumerate() {
                l.set(i, b);
            }
            layers.push(l);
        }
        let cached_l0 = layers.iter().map(BitLayer::popcount).sum();
        Self { layers, cached_l0 }
    }

    /// Number of ReLUs kept: the cached L0 norm.
    pub fn l0(&self) -> usize {
        self.cached_l0
    }

    /// Number of mask layers (maskable activation layers in the net).
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sites(&self, mask_layer: usize) -> usize {
        self.layers[mask_layer].site_count
    }

    pub fn layer_index(&self, mask_layer: usize) -> usize {
        self.layers[mask_layer].layer_index
    }

    #[inline]
    pub fn get(&self, mask_layer: usize, site: usize) -> bool {
        self.layers[mask_layer].get(site)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.site_count == b.site_count && a.layer_index == b.layer_index)
    }

    /// Per-layer on-counts `(layer index, count)`; they sum to `l0()`.
    pub fn per_layer_counts(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.layer_index, l.popcount()))
            .collect()
    }

    /// Sample `k` distinct currently-on sites uniformly without replacement.
    /// Deterministic given the stream state.
    pub fn sample_removal(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<RemovalSet> {
        if k > self.cached_l0 {
            return Err(Error::Mask(format!(
                "cannot sample {k} sites from a mask with L0 {}",
                self.cached_l0
            )));
        }
        let mut on_sites = Vec::with_capacity(self.cached_l0);
        for (li, layer) in self.layers.iter().enumerate() {
            for site in 0..layer.site_count {
                if layer.get(site) {
                    on_sites.push((li, site));
                }
            }
        }
        // Partial Fisher-Yates: the first k slots are a uniform sample.
        let n = on_sites.len();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            on_sites.swap(i, j);
        }
        let mut sites: Vec<(usize, usize)> = on_sites[..k]
            .iter()
            .map(|&(li, s)| (self.layers[li].layer_index, s))
            .collect();
        sites.sort_unstable();
        Ok(RemovalSet { sites })
    }

    /// Clear the given sites. Errors if any site is already off; the input
    /// mask is untouched.
    pub fn apply_removal(&self, removal: &RemovalSet) -> Result<Self> {
        let mut out = self.clone();
        for &(layer_index, site) in &removal.sites {
            let li = out
                .layers
                .iter()
                .position(|l| l.layer_index == layer_index)
                .ok_or_else(|| Error::Mask(format!("no mask layer with index {layer_index}")))?;
            if site >= out.layers[li].site_count {
                return Err(Error::Mask(format!(
                    "site {site} out of range for layer {layer_index}"
                )));
            }
            if !out.layers[li].get(site) {
                return Err(Error::Mask(format!(
                    "site ({layer_index}, {site}) is already off"
                )));
            }
            out.layers[li].set(site, false);
            out.cached_l0 -= 1;
        }
        Ok(out)
    }

    /// Intersection over union relative to `self`'s budget:
    /// `||self AND other||_0 / ||self||_0`. `self` is conventionally the
    /// smaller-budget mask.
    pub fn iou(&self, other: &Self) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::Mask("iou over masks of different shape".into()));
        }
        if self.cached_l0 == 0 {
            return Err(Error::Mask("iou denominator mask has L0 = 0".into()));
        }
        let mut inter = 0usize;
        for (a, b) in self.layers.iter().zip(&other.layers) {
            for (x, y) in a.bytes.iter().zip(&b.bytes) {
                inter += (x & y).count_ones() as usize;
            }
        }
        Ok(inter as f64 / self.cached_l0 as f64)
    }

    /// True when every on-bit of `self` is also on in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_shape(other)
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.bytes.iter().zip(&b.bytes).all(|(x, y)| x & !y == 0))
    }

    /// Binary layout: magic `RMSK1`, u32 LE layer count; per layer u32 LE
    /// layer index, u64 LE site count, packed LSB-first bitstream padded to a
    /// byte boundary; trailer u64 LE total L0 as an integrity check.
    pub fn serialize<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            out.write_all(&(layer.layer_index as u32).to_le_bytes())?;
            out.write_all(&(layer.site_count as u64).to_le_bytes())?;
            out.write_all(&layer.bytes)?;
        }
        out.write_all(&(self.cached_l0 as u64).to_le_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.serialize(&mut buf).expect("vec write");
        buf
    }

    pub fn save_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn deserialize<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Codec(format!(
                "bad mask magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u32buf)?;
        let layer_count = u32::from_le_bytes(u32buf) as usize;
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            input.read_exact(&mut u32buf)?;
            let layer_index = u32::from_le_bytes(u32buf) as usize;
            input.read_exact(&mut u64buf)?;
            let site_count = u64::from_le_bytes(u64buf) as usize;
            let mut bytes = vec![0u8; site_count.div_ceil(8)];
            input.read_exact(&mut bytes)?;
            let layer = BitLayer {
                layer_index,
                site_count,
                bytes,
            };
            let tail = site_count % 8;
            if tail != 0 && layer.bytes.last().is_some_and(|b| b >> tail != 0) {
                return Err(Error::Codec(format!(
                    "layer {layer_index}: nonzero padding bits"
                )));
            }
            layers.push(layer);
        }
        input.read_exact(&mut u64buf)?;
        let declared_l0 = u64::from_le_bytes(u64buf) as usize;
        let actual: usize = layers.iter().map(BitLayer::popcount).sum();
        if declared_l0 != actual {
            return Err(Error::Codec(format!(
                "mask trailer declares L0 {declared_l0} but popcount is {actual}"
            )));
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::Codec("trailing bytes after mask".into()));
        }
        Ok(Self {
            layers,
            cached_l0: actual,
        })
    }

    pub fn load_file(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::deserialize(bytes.as_slice())
    }

    /// Human-readable JSON export: per-layer arrays of 0/1.
    pub fn to_debug_json(&self) -> String {
        let layers: Vec<serde_json::Value> = self
            .layers
            .iter()
            .map(|l| {
                let bits: Vec<u8> = (0..l.site_count).map(|i| u8::from(l.get(i))).collect();
                serde_json::json!({ "layer": l.layer_index, "bits": bits })
            })
            .collect();
        serde_json::json!({ "l0": self.cached_l0, "layers": layers }).to_string()
    }
}
