//! Run manifests: everything needed to repeat a run byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ctxfuse::{GameConfig, SimConfig, SyntheticExpertProfile};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: String,
    pub sha256: String,
}

/// How rounds were split; `train_ids` is filled in when a split file was used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_frac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_ids: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub config_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_config: Option<SimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<SyntheticExpertProfile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game_config: Option<GameConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
    /// Output file name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>) -> Self {
        RunManifest {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed: None,
            sim_config: None,
            profiles: None,
            game_config: None,
            dataset: None,
            split: None,
            outputs: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| ctxfuse::FusionError::InvalidConfig(format!("manifest {}: {e}", path.display())).into())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` into `dir/name` and records its hash.
pub fn write_output(dir: &Path, name: &str, contents: &[u8], manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    manifest.outputs.insert(name.to_string(), sha256_hex(contents));
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let mut m = RunManifest::new("replay", Some(Path::new("game.toml")));
        m.game_config = Some(GameConfig { experts: vec!["a".into()], ..GameConfig::default() });
        m.split = Some(SplitRecord { train_frac: Some(0.7), split_file: None, train_ids: None });
        m.outputs.insert("metrics.json".into(), "00".into());
        let back: RunManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
