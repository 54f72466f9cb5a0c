//! Parameter checkpoints: a JSON manifest of names, shapes and offsets
//! plus one flat little-endian `f64` blob.

use std::fs;
use std::path::Path;

use csf_core::numcore::{ParamStore, Tensor};
use csf_core::pipeline::{CsfModel, TrainConfig};
use csf_core::stgcn::StgcnConfig;
use csf_core::vae::VaeDims;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_json, write_json};

pub const FORMAT: &str = "csf-checkpoint";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in elements.
    pub offset: usize,
}

/// Architecture of the saved model, enough to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_stations: usize,
    pub vae: Option<VaeDims>,
    pub stgcn: StgcnConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub byte_order: String,
    pub architecture: Option<Architecture>,
    pub config: Option<TrainConfig>,
    pub params: Vec<ParamEntry>,
    pub total_elements: usize,
}

impl CheckpointManifest {
    fn for_store(store: &ParamStore) -> Self {
        let mut offset = 0;
        let params = store
            .iter()
            .map(|(_, name, t)| {
                let e = ParamEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += t.len();
                e
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            dtype: "f64".into(),
            byte_order: "little".into(),
            architecture: None,
            config: None,
            params,
            total_elements: offset,
        }
    }
}

/// Write `checkpoint.json` and `params.bin` into `dir`.
pub fn save_store(dir: &Path, store: &ParamStore, config: Option<&TrainConfig>, arch: Option<Architecture>) -> Result<()> {
    let mut manifest = CheckpointManifest::for_store(store);
    manifest.config = config.cloned();
    manifest.architecture = arch;
    let mut blob = Vec::with_capacity(manifest.total_elements * 8);
    for (_, _, t) in store.iter() {
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    let p = dir.join(BLOB_FILE);
    fs::write(&p, blob).map_err(|e| CliError::io(&p, e))
}

pub fn load_store(dir: &Path) -> Result<(CheckpointManifest, ParamStore)> {
    let manifest: CheckpointManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format != FORMAT || manifest.version != FORMAT_VERSION {
        return Err(CliError::input(format!(
            "unsupported checkpoint {} v{}",
            manifest.format, manifest.version
        )));
    }
    if manifest.dtype != "f64" || manifest.byte_order != "little" {
        return Err(CliError::input(format!("unsupported dtype {} / {}", manifest.dtype, manifest.byte_order)));
    }
    let p = dir.join(BLOB_FILE);
    let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
    if bytes.len() != manifest.total_elements * 8 {
        return Err(CliError::input(format!(
            "{}: {} bytes, manifest expects {}",
            p.display(),
            bytes.len(),
            manifest.total_elements * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut store = ParamStore::new();
    for e in &manifest.params {
        let n: usize = e.shape.iter().product();
        let data = values
            .get(e.offset..e.offset + n)
            .ok_or_else(|| CliError::input(format!("parameter {} runs past the blob", e.name)))?
            .to_vec();
        let t = Tensor::new(e.shape.clone(), data).map_err(|err| CliError::input(format!("{}: {err}", e.name)))?;
        store.add(e.name.clone(), t);
    }
    Ok((manifest, store))
}

/// Checkpoint a whole model, architecture included.
pub fn save_model(dir: &Path, model: &CsfModel) -> Result<()> {
    let arch = Architecture {
        n_stations: model.n_stations(),
        vae: model.config.use_embeddings.then(|| CsfModel::vae_dims(&model.config)),
        stgcn: CsfModel::stgcn_config(&model.config),
    };
    save_store(dir, &model.store, Some(&model.config), Some(arch))
}
