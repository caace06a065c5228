use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Audit record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config_digest: Option<String>,
    pub config: Option<serde_json::Value>,
    pub seed: u64,
    pub dataset: Option<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<Artifact>,
    pub ot_solves: Option<usize>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: None,
            config: None,
            seed,
            dataset: None,
            started_unix: unix_now(),
            finished_unix: 0.0,
            outputs: Vec::new(),
            ot_solves: None,
        }
    }

    /// Writes `bytes` to `path` and records it.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record(path)
    }

    /// Records a file some other writer produced.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading back {}", path.display()))?;
        self.outputs.push(Artifact {
            path: path.to_path_buf(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
