pub mod analyze_iou;
pub mod audit_bounds;
pub mod compare;
pub mod count_relus;
pub mod gen_data;
pub mod run_bcd;
pub mod run_snl;

use std::path::Path;

use relu_sculpt_core::error::Result;

/// Create the output directory (and parents) if needed.
pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Results row shared by the run commands so `compare` can merge them.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct RunResults {
    pub method: String,
    pub budget: usize,
    pub seed: u64,
    pub train_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_reached: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_before_binarize: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_after_binarize: Option<f64>,
}
