use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::data::write_file;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: sha256_hex(bytes) }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self::of_bytes(path, &bytes))
    }
}

/// Sidecar written next to every output as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    /// Resolved configuration, one `key = value` per entry.
    pub config: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub output: FileDigest,
    /// Command-specific facts such as true simulation parameters.
    pub extra: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: cfg.hash(),
            config: cfg.canonical().lines().map(str::to_string).collect(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            output: FileDigest { path: String::new(), sha256: String::new() },
            extra: BTreeMap::new(),
        }
    }

    pub fn sidecar(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    /// Writes `bytes` to `path` and the manifest beside it.
    pub fn write_with(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_file(path, bytes)?;
        let mut m = self.clone();
        m.output = FileDigest::of_bytes(path, bytes);
        let mut json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        json.push(b'\n');
        write_file(&Self::sidecar(path), &json)
    }
}
