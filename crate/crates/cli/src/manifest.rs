//! Run manifest written next to the outputs.

use crate::config::SeedSource;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub seed: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    pub master_seed: u64,
    pub seed_source: SeedSource,
    /// Results do not depend on this; recorded for timing comparisons.
    pub workers: usize,
    /// The resolved configuration in config-file syntax.
    pub config: String,
    pub derived_seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub error: Option<String>,
    #[serde(skip)]
    dir: PathBuf,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dir: &Path,
        command: &str,
        master_seed: u64,
        seed_source: SeedSource,
        workers: usize,
        config: String,
        derived_seeds: Vec<u64>,
    ) -> Self {
        Self {
            tool: "lyapsync".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: Status::Running,
            master_seed,
            seed_source,
            workers,
            config,
            derived_seeds,
            runs: Vec::new(),
            outputs: Vec::new(),
            error: None,
            dir: dir.to_path_buf(),
        }
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record_output(&mut self, name: &str) {
        debug_assert!(!self.outputs.iter().any(|o| o == name), "{name} recorded twice");
        self.outputs.push(name.to_string());
    }

    pub fn write(&self) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(self.path(), text + "\n")
    }

    pub fn finish(&mut self, error: Option<String>) -> std::io::Result<()> {
        self.status = if error.is_some() { Status::Failed } else { Status::Complete };
        self.error = error;
        self.write()
    }
}
