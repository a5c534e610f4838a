//! Run manifests: enough to reproduce a run bit-exactly.

use std::path::Path;

use gaitlab::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Hex SHA-256 of the config file bytes, when there is one.
    pub config_sha256: Option<String>,
    /// Verbatim config text.
    pub config: Option<String>,
    pub seed: u64,
    /// Every episode or training seed derived from `seed`.
    pub seeds: Vec<u64>,
    pub parallel: usize,
    pub budget: Option<u64>,
    pub args: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&str>, seed: u64, parallel: usize, budget: Option<u64>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config.map(sha256_hex),
            config: config.map(str::to_owned),
            seed,
            seeds: Vec::new(),
            parallel,
            budget,
            args: std::env::args().collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
