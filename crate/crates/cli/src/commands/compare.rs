//! `compare`: merge results from completed run directories into one
//! budget/method/accuracy table.

use std::path::{Path, PathBuf};

use relu_sculpt_core::error::{Error, Result};

use super::RunResults;

pub fn run(run_dirs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    if run_dirs.is_empty() {
        return Err(Error::Config(
            "compare needs at least one run directory".into(),
        ));
    }
    let mut rows: Vec<RunResults> = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let path = dir.join("results.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("missing run artifact {}: {e}", path.display())))?;
        rows.push(serde_json::from_str(&text)?);
    }
    rows.sort_by(|a, b| {
        (a.budget, a.method.as_str(), a.seed).cmp(&(b.budget, b.method.as_str(), b.seed))
    });

    let mut csv = String::from("budget,method,accuracy,seed\n");
    for r in &rows {
        let accuracy = r.test_accuracy.unwrap_or(r.train_accuracy);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.budget, r.method, accuracy, r.seed
        ));
    }
    match out {
        Some(dir) => {
            super::ensure_out_dir(dir)?;
            std::fs::write(dir.join("compare.csv"), &csv)?;
            println!("wrote {}", dir.join("compare.csv").display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
