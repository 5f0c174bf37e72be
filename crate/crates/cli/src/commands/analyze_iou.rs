//! `analyze-iou`: overlap analysis across a directory of mask checkpoints.
//!
//! Emits the full pairwise IoU matrix (smaller-budget mask as denominator)
//! plus the consecutive-pair series. Checkpoints are ordered by file name,
//! which the run commands arrange to be chronological.

use std::path::Path;

use relu_sculpt_core::error::{Error, Result};
use relu_sculpt_core::mask::ReluMask;
use relu_sculpt_core::snl::iou_matrix;

use crate::logging;

pub fn run(checkpoint_dir: &Path, out: &Path) -> Result<()> {
    super::ensure_out_dir(out)?;
    let mut files: Vec<_> = std::fs::read_dir(checkpoint_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "rmsk1"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .rmsk1 checkpoints in {}",
            checkpoint_dir.display()
        )));
    }
    logging::info(format!("analyzing {} checkpoints", files.len()));

    let mut masks: Vec<ReluMask> = Vec::with_capacity(files.len());
    for p in &files {
        masks.push(ReluMask::load_file(p)?);
    }
    // Zero-budget masks cannot be IoU denominators; drop them rather than
    // failing the whole analysis.
    let keep: Vec<usize> = (0..masks.len()).filter(|&i| masks[i].l0() > 0).collect();
    if keep.len() < masks.len() {
        logging::info(format!(
            "skipping {} zero-budget checkpoint(s)",
            masks.len() - keep.len()
        ));
    }
    if keep.is_empty() {
        return Err(Error::Mask("all checkpoints have zero budget".into()));
    }
    let files: Vec<_> = keep.iter().map(|&i| files[i].clone()).collect();
    let masks: Vec<ReluMask> = keep.into_iter().map(|i| masks[i].clone()).collect();
    let refs: Vec<&ReluMask> = masks.iter().collect();
    let matrix = iou_matrix(&refs)?;

    let mut matrix_csv = String::new();
    matrix_csv.push_str("checkpoint");
    for (j, _) in files.iter().enumerate() {
        matrix_csv.push_str(&format!(",{j}"));
    }
    matrix_csv.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        matrix_csv.push_str(&format!("{i}"));
        for v in row {
            matrix_csv.push_str(&format!(",{v}"));
        }
        matrix_csv.push('\n');
    }
    std::fs::write(out.join("iou_matrix.csv"), matrix_csv)?;

    let mut pairs_csv = String::from("from,to,budget_from,budget_to,iou\n");
    for i in 0..masks.len().saturating_sub(1) {
        let (a, b) = (&masks[i], &masks[i + 1]);
        // Denominator is the smaller-budget mask of the pair.
        let (denom, other) = if a.l0() <= b.l0() { (a, b) } else { (b, a) };
        let v = denom.iou(other)?;
        pairs_csv.push_str(&format!("{},{},{},{},{}\n", i, i + 1, a.l0(), b.l0(), v));
    }
    std::fs::write(out.join("iou_consecutive.csv"), pairs_csv)?;
    logging::info(format!("wrote {}", out.join("iou_matrix.csv").display()));
    Ok(())
}
