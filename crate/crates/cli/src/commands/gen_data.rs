//! `gen-data`: write a generated dataset to the CIFAR-10 binary layout for
//! fixture reuse.

use std::path::Path;

use relu_sculpt_core::data::save_cifar10_bin;
use relu_sculpt_core::error::Result;

use crate::configs::GenDataConfig;
use crate::logging;
use crate::manifest::ManifestBuilder;

pub fn run(config_path: &Path, cfg: &GenDataConfig, out: &Path, seed: u64) -> Result<()> {
    super::ensure_out_dir(out)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let dataset = cfg.dataset.build(base)?;

    let mut manifest = ManifestBuilder::new("gen-data", serde_json::to_value(cfg)?, seed, 1);
    let bytes = save_cifar10_bin(&dataset)?;
    let file = out.join(&cfg.out_file);
    std::fs::write(&file, &bytes)?;
    manifest.add_output(cfg.out_file.display().to_string());

    let summary = serde_json::json!({
        "samples": dataset.len(),
        "sample_shape": dataset.sample_shape(),
        "class_count": dataset.class_count,
        "bytes": bytes.len(),
    });
    std::fs::write(
        out.join("dataset_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    manifest.add_output("dataset_summary.json");
    manifest.finish(out, "ok")?;
    logging::info(format!("wrote {} ({} bytes)", file.display(), bytes.len()));
    Ok(())
}
