//! Run manifest: the full resolved configuration plus an inventory of every
//! artifact a command emitted. Re-running with the same config and seed
//! reproduces the mask and weight artifacts byte for byte (timestamps aside).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use relu_sculpt_core::error::Result;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub engine_version: &'static str,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub status: String,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    threads: usize,
    started: u64,
    outputs: Vec<String>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, threads: usize) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            threads,
            started: now_unix(),
            outputs: Vec::new(),
        }
    }

    /// Record an emitted artifact (path relative to the output directory).
    pub fn add_output(&mut self, rel: impl Into<String>) {
        self.outputs.push(rel.into());
    }

    pub fn finish(mut self, out_dir: &Path, status: &str) -> Result<PathBuf> {
        self.outputs.push("manifest.json".to_string());
        self.outputs.sort();
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            threads: self.threads,
            engine_version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started,
            finished_unix: now_unix(),
            status: status.to_string(),
            outputs: self.outputs,
        };
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}
