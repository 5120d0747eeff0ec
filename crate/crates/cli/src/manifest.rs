use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, Result};

/// One file written by a command, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    /// Fully resolved config, after profile and seed overrides.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub artifact_versions: BTreeMap<String, String>,
    pub outputs: Vec<OutputFile>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_losses: Option<Vec<f64>>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut artifact_versions = BTreeMap::new();
        artifact_versions.insert(
            dalloc_core::environment::LOG_FORMAT.to_string(),
            dalloc_core::environment::LOG_VERSION.to_string(),
        );
        artifact_versions.insert(
            dalloc_core::embedding::EMBEDDING_FORMAT.to_string(),
            dalloc_core::embedding::EMBEDDING_VERSION.to_string(),
        );
        let mut seeds = BTreeMap::new();
        seeds.insert("run".to_string(), config.experiment.seed);
        seeds.insert("world".to_string(), config.experiment.world.seed);
        seeds.insert("training".to_string(), config.experiment.training.seed);
        Self {
            tool: "dalloc".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            config: serde_json::to_value(config).expect("config serialises"),
            seeds,
            artifact_versions,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            training_losses: None,
        }
    }

    /// Records a file already written under `dir`.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }

    /// Writes `manifest-<command>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::write(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
    }
}
