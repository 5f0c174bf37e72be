//! `count-relus`: per-layer and total ReLU site counts for an architecture.

use std::path::Path;

use relu_sculpt_core::error::Result;
use relu_sculpt_core::mask::ReluMask;
use relu_sculpt_core::net::NetworkSpec;

use crate::logging;

pub fn run(spec_path: &Path, input_shape: &[usize], out: Option<&Path>) -> Result<()> {
    let spec = NetworkSpec::from_file(spec_path).map_err(|e| {
        relu_sculpt_core::error::Error::Config(format!("{}: {e}", spec_path.display()))
    })?;
    let mask = ReluMask::all_ones(&spec, input_shape)?;
    let counts = mask.per_layer_counts();

    println!(
        "ReLU sites for {} at input {:?}",
        spec_path.display(),
        input_shape
    );
    println!("{:>12} {:>12}", "layer", "relu_count");
    for (layer, count) in &counts {
        println!("{layer:>12} {count:>12}");
    }
    println!("{:>12} {:>12}", "total", mask.l0());

    if let Some(dir) = out {
        super::ensure_out_dir(dir)?;
        let report = serde_json::json!({
            "spec": spec_path.display().to_string(),
            "input_shape": input_shape,
            "per_layer": counts,
            "total": mask.l0(),
        });
        let path = dir.join("relu_counts.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        logging::info(format!("wrote {}", path.display()));
    }
    Ok(())
}
