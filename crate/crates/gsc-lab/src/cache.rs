//! Byte-replay cache for experiment outputs.
//!
//! The key digests the pattern hash, the subcommand and its canonical
//! parameter string. A hit replays the stored CSV bytes exactly, which
//! is also what makes rerun outputs byte-identical when timing noise
//! would otherwise leak into the tables.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub struct ResultCache {
    dir: PathBuf,
}

impl ResultCache {
    pub fn new(dir: PathBuf) -> Self {
        ResultCache { dir }
    }

    pub fn key(pattern_hash: &str, subcommand: &str, params: &BTreeMap<String, String>) -> String {
        let mut canon = format!("gsc-cache-v1|{pattern_hash}|{subcommand}");
        for (k, v) in params {
            canon.push('|');
            canon.push_str(k);
            canon.push('=');
            canon.push_str(v);
        }
        let digest = Sha256::digest(canon.as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn entry_dir(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    /// Stored CSV text for the key, if present.
    pub fn lookup(&self, key: &str) -> Option<String> {
        let path = self.entry_dir(key).join("output.csv");
        std::fs::read_to_string(path).ok()
    }

    pub fn store(&self, key: &str, csv: &str, meta: &serde_json::Value) -> Result<()> {
        let dir = self.entry_dir(key);
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating cache entry {}", dir.display()))?;
        std::fs::write(dir.join("output.csv"), csv)?;
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta)? + "\n")?;
        Ok(())
    }
}

/// Canonical parameter map rendering shared by the cache key and the
/// manifests.
pub fn params_map(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
