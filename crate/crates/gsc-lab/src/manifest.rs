//! Run manifests: one JSON document per run recording the parameters,
//! derived estimates, output checksums and timing. Field order is
//! fixed by the struct definitions.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Estimates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hat_regression: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhobar_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dw_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub subcommand: String,
    pub params: BTreeMap<String, String>,
    pub outputs: Vec<OutputRef>,
    pub estimates: Estimates,
    pub cache_hit: bool,
    /// wall-clock seconds; informational, not covered by determinism
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub pattern_file: String,
    pub pattern_hash: String,
    pub deterministic: bool,
    pub seed: u64,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(pattern_file: &Path, pattern_hash: String, deterministic: bool, seed: u64) -> Self {
        Manifest {
            version: crate::VERSION.to_string(),
            pattern_file: pattern_file.display().to_string(),
            pattern_hash,
            deterministic,
            seed,
            complete: false,
            error: None,
            stages: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// The estimate the pipeline threads forward, from the most recent
    /// stage that produced one.
    pub fn rho_hat(&self) -> Option<f64> {
        self.stages.iter().rev().find_map(|s| s.estimates.rho_hat)
    }
}
