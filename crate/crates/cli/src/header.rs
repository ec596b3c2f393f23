//! The `run.json` reproducibility header written next to every command's outputs.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const HEADER_FILE: &str = "run.json";

#[derive(Serialize)]
pub struct RunHeader<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: &'a C,
}

/// Hex SHA-256 of the config's compact JSON.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(json))
}

impl<'a, C: Serialize> RunHeader<'a, C> {
    pub fn new(command: &'static str, seed: Option<u64>, config: &'a C) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash: config_hash(config),
            config,
        }
    }

    /// One line for stdout.
    pub fn summary(&self) -> String {
        let seed = self.seed.map_or("-".to_string(), |s| s.to_string());
        format!(
            "mogan {} {} seed={} config={}",
            self.version, self.command, seed, self.config_hash
        )
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(HEADER_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("header serializes");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
