//! Run manifests and deterministic output naming.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Appended to `<out>/manifests.jsonl`, one line per successful command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub subcommand: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
}

/// Short hash of the subcommand and its parameters; equal inputs give equal names.
pub fn run_id(subcommand: &str, parameters: &Value) -> String {
    let mut h = Sha256::new();
    h.update(subcommand.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(parameters).expect("parameters serialize"));
    hex::encode(&h.finalize()[..6])
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct Run {
    pub dir: PathBuf,
    pub id: String,
    subcommand: String,
    parameters: Value,
    seed: Option<u64>,
    started: String,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(dir: &Path, subcommand: &str, parameters: Value, seed: Option<u64>) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Run {
            dir: dir.to_path_buf(),
            id: run_id(subcommand, &parameters),
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            started: now(),
            outputs: Vec::new(),
        })
    }

    /// `<out>/<subcommand>-<run id>.<ext>`
    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}-{}.{ext}", self.subcommand, self.id))
    }

    pub fn write(&mut self, ext: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.path(ext);
        fs::write(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(self) -> std::io::Result<PathBuf> {
        let manifest = RunManifest {
            run_id: self.id,
            subcommand: self.subcommand,
            parameters: self.parameters,
            seed: self.seed,
            tool_version: candy_core::CODE_VERSION.to_string(),
            started: self.started,
            finished: now(),
            outputs: self.outputs,
        };
        let path = self.dir.join("manifests.jsonl");
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut line = serde_json::to_vec(&manifest).expect("manifest serializes");
        line.push(b'\n');
        f.write_all(&line)?;
        Ok(path)
    }
}
