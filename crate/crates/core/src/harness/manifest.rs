use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn module_versions() -> BTreeMap<String, String> {
    BTreeMap::from([(
        env!("CARGO_PKG_NAME").to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    )])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub time: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub scenario_id: String,
    pub config_file: String,
    /// sha256 of `config_file` as written.
    pub config_hash: String,
    pub seed: u64,
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub advisories: Vec<String>,
    pub snapshots: Vec<SnapshotEntry>,
    /// Every file in the run directory other than the manifest, relative paths.
    pub artifacts: Vec<String>,
    pub module_versions: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact(format!(
                "{} not found",
                path.display()
            )));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }

    pub fn add_artifact(&mut self, rel: &str) {
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_string());
            self.artifacts.sort();
        }
    }

    /// Config hash matches the stored config and every listed file exists.
    pub fn check(&self, dir: &Path) -> Result<()> {
        let cfg = dir.join(&self.config_file);
        let bytes = std::fs::read(&cfg)
            .map_err(|_| Error::MissingArtifact(format!("{} not found", cfg.display())))?;
        if sha256_hex(&bytes) != self.config_hash {
            return Err(Error::MissingArtifact(format!(
                "{} does not match the manifest hash",
                cfg.display()
            )));
        }
        let snapshot_files = self.snapshots.iter().map(|s| &s.file);
        for rel in self.artifacts.iter().chain(snapshot_files) {
            if !dir.join(rel).exists() {
                return Err(Error::MissingArtifact(format!("{rel} listed but missing")));
            }
        }
        Ok(())
    }
}
