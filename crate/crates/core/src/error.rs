//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: {message}")]
    ShapeMismatch { layer: usize, message: String },

    #[error("tensor data length {data_len} does not match shape {shape:?}")]
    BadTensor { shape: Vec<usize>, data_len: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("mask error: {0}")]
    Mask(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("enumeration of {count} masks exceeds cap {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("budget target {target} exceeds current budget {current}")]
    BudgetTooLarge { target: usize, current: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
