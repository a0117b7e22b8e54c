use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Plain-text record of a run: what was asked for and what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = toml::to_string(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Re-hashes every listed file; returns the names that no longer match.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        let mut bad = Vec::new();
        for f in &self.files {
            let path = dir.join(&f.name);
            let bytes = std::fs::read(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
            if sha256_hex(&bytes) != f.sha256 {
                bad.push(f.name.clone());
            }
        }
        Ok(bad)
    }
}
