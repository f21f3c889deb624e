//! Run manifest: the seed, configuration, style vocabulary, and dataset
//! checksums behind one pipeline run. Checkpoints and reports embed its hash
//! so mismatched artifacts are rejected instead of silently combined.

use crate::error::{Result, ScrError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    /// Flag values as key=value strings; BTreeMap keeps serialization stable.
    pub config: BTreeMap<String, String>,
    pub style_vocabulary: Vec<String>,
    /// File name -> FNV-1a 64 hash of the file bytes, hex.
    pub dataset_checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        seed: u64,
        config: BTreeMap<String, String>,
        style_vocabulary: Vec<String>,
    ) -> Self {
        Self {
            version: VERSION.to_string(),
            seed,
            config,
            style_vocabulary,
            dataset_checksums: BTreeMap::new(),
        }
    }

    pub fn checksum_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| ScrError::Config(format!("bad dataset path {}", path.display())))?;
        self.dataset_checksums
            .insert(name, format!("{:016x}", fnv1a64(&bytes)));
        Ok(())
    }

    /// Hash over the canonical JSON form; embedded in every artifact.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| ScrError::Data(format!("{}: bad manifest: {e}", path.display())))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
