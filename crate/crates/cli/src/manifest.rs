//! Output directory bookkeeping: every file written by a run is hashed and
//! listed in `manifest.json` next to a copy of the effective config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub outputs: Vec<OutputEntry>,
    pub config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Collects the files of one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputEntry>,
    timestamps: bool,
}

impl OutputDir {
    pub fn create(root: &Path, timestamps: bool) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new(), timestamps })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn timestamps(&self) -> bool {
        self.timestamps
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        if rel == MANIFEST_FILE {
            return Err(CliError::Io("manifest.json is reserved".into()));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.retain(|o| o.path != rel);
        self.written.push(OutputEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(path)
    }

    pub fn outputs(&self) -> &[OutputEntry] {
        &self.written
    }

    /// Write `config.json` and `manifest.json`.
    pub fn finish(mut self, config: &ExperimentConfig, command: &str, started_at: Option<String>) -> Result<RunManifest, CliError> {
        let canonical = config.canonical_json();
        self.write(CONFIG_FILE, format!("{canonical}\n").as_bytes())?;
        let mut outputs = self.written.clone();
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(canonical.as_bytes()),
            seed: config.seed,
            started_at,
            finished_at: self.timestamps.then(now_utc),
            outputs,
            config: config.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}
