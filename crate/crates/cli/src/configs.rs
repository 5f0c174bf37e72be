//! Strict JSON configuration schemas. Unknown keys are errors, so a typo'd
//! hyperparameter fails loudly instead of silently running the defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relu_sculpt_core::data::{
    embed_grid, gen_blobs, gen_spirals, gen_synthetic_cifar, load_cifar10_file, Dataset,
};
use relu_sculpt_core::error::{Error, Result};
use relu_sculpt_core::net::NetworkSpec;
use relu_sculpt_core::snl::SnlConfig;
use relu_sculpt_core::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsCfg {
    pub classes: usize,
    pub per_class: usize,
    pub dims: usize,
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralsCfg {
    pub classes: usize,
    pub per_class: usize,
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Rasterize points onto a single-channel grid for conv nets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub size: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cifar10BinCfg {
    pub path: PathBuf,
    #[serde(default = "zero_mean")]
    pub mean: [f64; 3],
    #[serde(default = "unit_std")]
    pub std: [f64; 3],
}

fn zero_mean() -> [f64; 3] {
    [0.0; 3]
}

fn unit_std() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCifarCfg {
    pub classes: usize,
    pub per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetCfg {
    Blobs(BlobsCfg),
    Spirals(SpiralsCfg),
    Cifar10Bin(Cifar10BinCfg),
    SyntheticCifar(SyntheticCifarCfg),
}

impl DatasetCfg {
    /// Materialize the dataset. Paths resolve relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Dataset<f32>> {
        match self {
            DatasetCfg::Blobs(c) => gen_blobs(c.classes, c.per_class, c.dims, c.separation, c.seed),
            DatasetCfg::Spirals(c) => {
                let points = gen_spirals(c.classes, c.per_class, c.noise, c.seed)?;
                match &c.grid {
                    Some(g) => embed_grid(&points, g.size, g.sigma),
                    None => Ok(points),
                }
            }
            DatasetCfg::Cifar10Bin(c) => load_cifar10_file(&resolve(base, &c.path), c.mean, c.std),
            DatasetCfg::SyntheticCifar(c) => gen_synthetic_cifar(c.classes, c.per_class, c.seed),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Network source: a spec file or an inline spec document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_inline: Option<NetworkSpec>,
    /// Optional RSW1 checkpoint; otherwise weights initialize from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub input_shape: Vec<usize>,
}

impl NetworkSource {
    pub fn load_spec(&self, base: &Path) -> Result<NetworkSpec> {
        match (&self.spec, &self.spec_inline) {
            (Some(path), None) => NetworkSpec::from_file(&resolve(base, path)),
            (None, Some(spec)) => {
                // Inline specs go through the same strict key validation.
                NetworkSpec::from_json(&serde_json::to_string(&serde_json::json!({
                    "layers": spec.layers
                }))?)
            }
            _ => Err(Error::Config(
                "network needs exactly one of \"spec\" (path) or \"spec_inline\"".into(),
            )),
        }
    }

    pub fn load_params(
        &self,
        base: &Path,
        spec: &NetworkSpec,
        seed: u64,
    ) -> Result<relu_sculpt_core::params::Parameters<f32>> {
        match &self.checkpoint {
            Some(path) => {
                relu_sculpt_core::params::Parameters::load_file(spec, &resolve(base, path))
            }
            None => Ok(relu_sculpt_core::params::Parameters::init(spec, seed)),
        }
    }
}

/// Reduction knobs as they appear in config files; the run seed and thread
/// count come from the top level / command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcdSection {
    pub drc: usize,
    pub adt_percent: f64,
    pub rt: usize,
    pub b_target: usize,
    pub finetune: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_subset_size: Option<usize>,
    /// Optional starting mask (RMSK1); defaults to all-ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBcdConfig {
    pub network: NetworkSource,
    pub dataset: DatasetCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<DatasetCfg>,
    /// Dense warm-up training applied when the network starts from random
    /// weights instead of a checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<TrainConfig>,
    pub bcd: BcdSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSnlConfig {
    pub network: NetworkSource,
    pub dataset: DatasetCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<DatasetCfg>,
    /// Dense warm-up training applied when the network starts from random
    /// weights instead of a checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<TrainConfig>,
    pub snl: SnlConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBoundsConfig {
    pub network: NetworkSource,
    pub dataset: DatasetCfg,
    pub lambda: f64,
    /// Smoothness constant for the proximal term; when absent it is
    /// estimated from sampled soft-mask gradient pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_beta_samples")]
    pub beta_samples: usize,
    pub budget: usize,
    pub drc: usize,
    pub rt: usize,
    pub adt_percent: f64,
    pub n_seeds: usize,
    #[serde(default = "default_enumeration_cap")]
    pub max_enumeration: u128,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta_samples() -> usize {
    100
}

fn default_enumeration_cap() -> u128 {
    1 << 16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataConfig {
    pub dataset: DatasetCfg,
    /// Output file name (CIFAR-10 binary layout; samples must be
    /// [3, 32, 32] with values in [0, 1]).
    pub out_file: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

/// Parse a config file strictly.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
