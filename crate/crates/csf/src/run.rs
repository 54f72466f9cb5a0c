//! Run directories written by `train` and read by `forecast`.
//!
//! ```text
//! run/
//!   config.txt          canonical key = value config
//!   checkpoint.json     parameter manifest (see `checkpoint`)
//!   params.bin
//!   model.json          station ids, preprocessing statistics, matrix
//!   training_log.jsonl  one record per epoch
//!   metrics.json        test-split report
//!   embeddings.csv      test-split runoff embeddings (when enabled)
//!   manifest.json
//! ```
//!
//! Everything except `manifest.json` is a pure function of the inputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use csf_core::flowgraph::N_STATIC;
use csf_core::numcore::SparseMatrix;
use csf_core::pipeline::{CsfModel, EpochRecord, PreprocessStats, SplitRanges};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{CliError, Result};
use crate::io::{read_json, read_text, write_json};

pub const META_FILE: &str = "model.json";
pub const LOG_FILE: &str = "training_log.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub station_ids: Vec<String>,
    /// Date of day 0 of the training data.
    pub start: NaiveDate,
    pub split: SplitRanges,
    pub best_epoch: Option<usize>,
    pub stats: PreprocessStats,
    pub statics: Vec<[f64; N_STATIC]>,
    pub matrix: MatrixEntries,
}

/// Sparse matrix as `(row, col, value)` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntries {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl MatrixEntries {
    pub fn from_matrix(m: &SparseMatrix) -> Self {
        Self {
            n: m.n_rows(),
            entries: (0..m.n_rows())
                .flat_map(|i| m.row(i).iter().map(move |&(j, w)| (i, j, w)))
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<SparseMatrix> {
        let mut m = SparseMatrix::new(self.n, self.n);
        for &(i, j, w) in &self.entries {
            if i >= self.n || j >= self.n {
                return Err(CliError::input(format!("matrix entry ({i}, {j}) outside {0}×{0}", self.n)));
            }
            m.set(i, j, w);
        }
        Ok(m)
    }
}

pub fn write_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    for r in log {
        let line = serde_json::to_string(r).map_err(|e| CliError::Invariant(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<EpochRecord>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::io(path, e)))
        .collect()
}

pub fn save_model(dir: &Path, model: &CsfModel, meta: &ModelMeta) -> Result<()> {
    checkpoint::save_model(dir, model)?;
    write_json(&dir.join(META_FILE), meta)
}

/// Reload a trained model and its metadata.
pub fn load_model(dir: &Path) -> Result<(CsfModel, ModelMeta)> {
    let (manifest, store) = checkpoint::load_store(dir)?;
    let config = manifest
        .config
        .ok_or_else(|| CliError::input(format!("{}: checkpoint has no model config", dir.display())))?;
    let meta: ModelMeta = read_json(&dir.join(META_FILE))?;
    let m = meta.matrix.to_matrix()?;
    let model = CsfModel::from_parts(config, store, m, meta.stats.clone(), meta.statics.clone())
        .ok_or_else(|| CliError::input(format!("{}: parameters do not match the recorded architecture", dir.display())))?;
    if model.n_stations() != meta.station_ids.len() {
        return Err(CliError::input(format!(
            "{}: {} station ids for a {}-node model",
            dir.display(),
            meta.station_ids.len(),
            model.n_stations()
        )));
    }
    Ok((model, meta))
}

