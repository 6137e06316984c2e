//! Run manifests: what ran, on which inputs, and what it wrote.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub seed: Option<u64>,
    /// SHA-256 of the cross-section dataset, for commands that read one.
    pub dataset_sha256: Option<String>,
    pub inputs: Vec<InputEntry>,
    pub tool_version: String,
    pub threads: usize,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_s: f64,
}

/// Collects inputs and outputs for one command; inputs are hashed on entry
/// and re-verified before the manifest is written.
pub struct Recorder {
    command: String,
    out_dir: PathBuf,
    config_hash: String,
    seed: Option<u64>,
    dataset_sha256: Option<String>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl Recorder {
    pub fn new<C: Serialize>(command: &str, out_dir: &Path, config: &C, seed: Option<u64>) -> Result<Self> {
        std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let canonical = serde_json::to_vec(config)?;
        Ok(Self {
            command: command.into(),
            out_dir: out_dir.into(),
            config_hash: sha256_hex(&canonical),
            seed,
            dataset_sha256: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let h = sha256_file(path)?;
        self.inputs.push((path.into(), h));
        Ok(())
    }

    pub fn dataset(&mut self, sha256: String) {
        self.dataset_sha256 = Some(sha256);
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.outputs.push(p.clone());
        Ok(p)
    }

    pub fn finish(self) -> Result<PathBuf> {
        for (p, h) in &self.inputs {
            if &sha256_file(p)? != h {
                bail!("input {} changed during the run", p.display());
            }
        }
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                Ok(OutputEntry {
                    path: p.file_name().unwrap().to_string_lossy().into_owned(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            args: std::env::args().skip(1).collect(),
            config_hash: self.config_hash,
            seed: self.seed,
            dataset_sha256: self.dataset_sha256,
            inputs: self
                .inputs
                .into_iter()
                .map(|(p, sha256)| InputEntry {
                    path: p.display().to_string(),
                    sha256,
                })
                .collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            threads: rayon::current_num_threads(),
            outputs,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let p = self.out_dir.join(MANIFEST_NAME);
        std::fs::write(&p, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(p)
    }
}
