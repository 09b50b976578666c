//! Run manifests: what was run, on which inputs, producing which files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self { path: path.to_path_buf(), sha256: format!("{:x}", Sha256::digest(&bytes)) })
    }
}

/// `config` holds every resolved setting; passing it back through `--config`
/// reproduces the run.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub config: C,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, config: C, seed: Option<u64>, started_unix: f64) -> Self {
        Self {
            tool: "mci",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config,
            seed,
            started_unix,
            finished_unix: started_unix,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(mut self, path: &Path) -> std::io::Result<()> {
        self.finished_unix = now_unix();
        let json = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?;
        fs::write(path, json + "\n")
    }
}
