use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{atomic_write, sha256_file};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one CLI run. Timestamps are informational and excluded from
/// artifact hashes because the manifest itself is not listed as an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub weights_sha256: Option<String>,
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<Artifact>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            weights_sha256: None,
            command: command.into(),
            params: BTreeMap::new(),
            started_unix: now(),
            finished_unix: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    /// Hash `path` (inside `run_dir`) and list it.
    pub fn add_artifact(&mut self, run_dir: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(run_dir).unwrap_or(path);
        let bytes = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
        let entry = Artifact {
            path: rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            sha256: sha256_file(path)?,
            bytes,
        };
        self.artifacts.retain(|a| a.path != entry.path);
        self.artifacts.push(entry);
        Ok(())
    }

    /// Sort artifacts, stamp the finish time and write `manifest.json`.
    pub fn finish(mut self, run_dir: &Path) -> Result<PathBuf> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        self.finished_unix = now();
        let path = run_dir.join(MANIFEST_NAME);
        atomic_write(&path, &serde_json::to_vec_pretty(&self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Artifacts whose file is missing or no longer matches its hash.
    pub fn verify(&self, run_dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| sha256_file(&run_dir.join(&a.path)).map_or(true, |h| h != a.sha256))
            .map(|a| a.path.clone())
            .collect()
    }
}
