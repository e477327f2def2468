//! Reproducibility stamps written next to every artifact.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stamp {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_sha256: String,
    pub cli_version: String,
    pub core_version: String,
    pub config: serde_json::Value,
}

impl Stamp {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let digest = Sha256::digest(serde_json::to_vec(&config)?);
        Ok(Self {
            command: command.into(),
            seed,
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: genextend::VERSION.into(),
            config,
        })
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    /// Writes `<artifact>.stamp.json`, or `stamp.json` inside a directory.
    pub fn write_for(&self, artifact: &Path) -> Result<PathBuf> {
        let path = stamp_path(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

pub fn stamp_path(artifact: &Path) -> PathBuf {
    if artifact.is_dir() {
        artifact.join("stamp.json")
    } else {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".stamp.json");
        artifact.with_file_name(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_config_only() {
        let a = Stamp::new("extend", 1, &serde_json::json!({"gamma": 5.0})).unwrap();
        let b = Stamp::new("extend", 1, &serde_json::json!({"gamma": 5.0})).unwrap();
        let c = Stamp::new("extend", 1, &serde_json::json!({"gamma": 4.0})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.config_sha256, c.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(stamp_path(Path::new("/x/out.wav")), PathBuf::from("/x/out.wav.stamp.json"));
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(stamp_path(dir.path()), dir.path().join("stamp.json"));
    }
}
