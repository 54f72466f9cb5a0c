//! One `manifest.json` per output directory: what ran, on which inputs,
//! and what it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, enough to re-run the command.
    pub args: Vec<String>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    pub versions: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects a manifest while a command runs.
pub struct ManifestBuilder {
    m: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command: &str, args: &[String]) -> Self {
        let versions = BTreeMap::from([
            ("csf".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("checkpoint_format".to_string(), crate::checkpoint::FORMAT_VERSION.to_string()),
        ]);
        Self {
            m: RunManifest {
                command: command.into(),
                args: args.to_vec(),
                config_hash: None,
                seed: None,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                started_at: now(),
                finished_at: String::new(),
                versions,
            },
        }
    }

    pub fn config_text(&mut self, text: &str) {
        self.m.config_hash = Some(sha256_hex(text.as_bytes()));
    }

    pub fn seed(&mut self, seed: u64) {
        self.m.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let d = file_digest(path)?;
        self.m.inputs.insert(path.display().to_string(), d);
        Ok(())
    }

    /// Record every file now present under `dir` and write the manifest.
    pub fn finish(mut self, dir: &Path) -> Result<RunManifest> {
        let mut outputs = Vec::new();
        list_files(dir, dir, &mut outputs)?;
        outputs.retain(|p| p != MANIFEST_FILE);
        outputs.sort();
        self.m.outputs = outputs;
        self.m.finished_at = now();
        write_json(&dir.join(MANIFEST_FILE), &self.m)?;
        Ok(self.m)
    }
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for e in entries {
        let e = e.map_err(|e| CliError::io(dir, e))?;
        let p: PathBuf = e.path();
        if p.is_dir() {
            list_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p);
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
