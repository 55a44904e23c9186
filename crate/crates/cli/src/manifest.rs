use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written once into every run directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub args: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    /// Paths relative to the run directory where possible.
    pub artifacts: Vec<PathBuf>,
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().collect(),
            config_path: None,
            seed: None,
            started_unix_s: now_unix(),
            finished_unix_s: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn add(&mut self, run_dir: &Path, artifact: &Path) {
        self.artifacts.push(
            artifact
                .strip_prefix(run_dir)
                .unwrap_or(artifact)
                .to_path_buf(),
        );
    }

    pub fn finish(mut self, run_dir: &Path) -> CliResult<PathBuf> {
        self.finished_unix_s = now_unix();
        let path = run_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes") + "\n";
        write(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| vastate::Error::io(path, e).into())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| vastate::Error::io(path, e).into())
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| vastate::Error::io(path, e).into())
}
