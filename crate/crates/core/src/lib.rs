//! ReLU-budget optimization toolkit.
//!
//! Replacing ReLUs with cheap linear or polynomial functions is the standard
//! way to make private inference affordable, and picking *which* ReLUs to
//! keep under a hard budget is a discrete sparse optimization problem. This
//! crate provides:
//!
//! - a small dense/convolutional network engine with maskable activation
//!   sites and exact reverse-mode gradients ([`engine`], [`net`], [`train`]);
//! - binary activation masks with removal algebra, IoU scoring, and a
//!   bit-exact codec ([`mask`]);
//! - block coordinate descent over the mask: sample removal hypotheses,
//!   keep the least damaging one, finetune, repeat until the budget is hit
//!   exactly ([`bcd`]);
//! - the LASSO-relaxed selective baseline with kappa-driven multiplier
//!   scheduling, hard thresholding, and hysteresis stabilization ([`snl`]);
//! - a brute-force optimality oracle and descent-bound auditor for tiny
//!   instances ([`oracle`]);
//! - deterministic dataset generators and CIFAR-10 binary ingestion
//!   ([`data`]).
//!
//! Everything is seeded: a single top-level seed fans out into named
//! substreams, so runs (including parallel trial evaluation) reproduce
//! byte for byte.

pub mod bcd;
pub mod data;
pub mod engine;
pub mod error;
pub mod gradcheck;
pub mod mask;
pub mod net;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod snl;
pub mod tensor;
pub mod train;

pub use bcd::{bcd_run, bcd_step, num_steps, BcdConfig, BcdRunLog};
pub use data::{gen_blobs, gen_spirals, Dataset};
pub use engine::{evaluate_accuracy, forward, loss_ce, soft_forward};
pub use error::{Error, Result};
pub use mask::{ReluMask, RemovalSet};
pub use net::{infer_shapes, mask_layout, NetworkSpec};
pub use params::Parameters;
pub use snl::{hysteresis_update, iou_matrix, snl_run, SnlConfig, SoftMask};
pub use tensor::Tensor;
pub use train::{cosine_lr, finetune, TrainConfig};
