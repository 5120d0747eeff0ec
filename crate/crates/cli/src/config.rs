//! Run configuration: the experiment settings plus per-command sections.
//!
//! Configs are TOML. A run manifest written by an earlier command is also
//! accepted, in which case its resolved config is reused verbatim.

use std::path::{Path, PathBuf};

use dalloc_core::{ExperimentConfig, PolicyKind, Profile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub data: DataConfig,
    pub simulate: SimulateConfig,
    pub replay: ReplayConfig,
}

/// `gen-data` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub customers: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { customers: 10_000 }
    }
}

/// Extra studies `simulate` runs next to the policy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub ulcc: bool,
    pub elasticity: bool,
    pub uncertainty: bool,
    pub elasticity_train_customers: usize,
    pub eval_customers: usize,
    pub grid_points: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            ulcc: true,
            elasticity: true,
            uncertainty: true,
            elasticity_train_customers: 10_000,
            eval_customers: 1_000,
            grid_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub policy: PolicyKind,
    pub batch_size: usize,
    /// Logs whose action counts fail a chi-square uniformity test below this
    /// p-value are rejected.
    pub min_uniformity_p: f64,
    /// Embedding checkpoint; when absent one is trained on the log itself.
    pub embedding: Option<PathBuf>,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Random,
            batch_size: 500,
            min_uniformity_p: 0.001,
            embedding: None,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Reads a TOML config, or the config embedded in a `.json` run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
            return serde_json::from_value(manifest.config).map_err(|e| CliError::input(path, e));
        }
        Self::from_toml(&text).map_err(|e| CliError::input(path, e))
    }

    /// Loads `path` (defaults when absent), applies overrides and validates.
    pub fn resolve(path: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(profile) = overrides.profile {
            cfg.experiment.apply_profile(profile);
        }
        if let Some(seed) = overrides.seed {
            cfg.experiment.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        if self.data.customers == 0 {
            return Err(CliError::validation("data.customers must be >= 1"));
        }
        if self.replay.batch_size == 0 {
            return Err(CliError::validation("replay.batch_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.replay.min_uniformity_p) {
            return Err(CliError::validation("replay.min_uniformity_p must lie in [0, 1)"));
        }
        if self.simulate.grid_points < 2 || self.simulate.eval_customers == 0 {
            return Err(CliError::validation(
                "simulate.grid_points must be >= 2 and simulate.eval_customers >= 1",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form (object keys sorted).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        sha256_hex(canonical_json(&value).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Compact JSON with object keys in lexicographic order at every level.
pub fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", body.join(","))
        }
        other => other.to_string(),
    }
}
