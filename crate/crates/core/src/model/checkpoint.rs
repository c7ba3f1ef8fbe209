use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::OptimizerState;
use super::params::{Param, ParamStore};
use super::state::{ModelSpec, ModelState};
use crate::error::{Error, Result};
use crate::gconstruct::graph::FileEntry;
use crate::util::binio;

pub const CHECKPOINT_FORMAT: &str = "hetgnn-checkpoint-v1";
pub const CHECKPOINT_MANIFEST: &str = "model.json";

/// One parameter tensor of a checkpoint manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    name: String,
    #[serde(flatten)]
    meta: Param,
    file: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam_m: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam_v: Option<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointManifest {
    format: String,
    fingerprint: String,
    spec: ModelSpec,
    optimizer: OptimizerState,
    tensors: Vec<TensorEntry>,
}

fn tensor_file(name: &str, suffix: &str) -> String {
    format!("tensors/{name}{suffix}.bin")
}

/// Writes one little-endian f64 tensor file per parameter and per
/// optimizer moment under `dir`.
pub fn write_tensors(dir: &Path, params: &ParamStore, optimizer: &OptimizerState) -> Result<Vec<TensorEntry>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::new();
    for (name, p) in params.iter() {
        let write = |suffix: &str, data: &[f64]| {
            FileEntry::write(dir, tensor_file(name, suffix), |path| binio::write_f64_tensor(path, p.rows, p.cols, data))
        };
        tensors.push(TensorEntry {
            name: name.clone(),
            meta: p.clone(),
            file: write("", &p.data)?,
            adam_m: optimizer.m.get(name).map(|m| write(".adam_m", m)).transpose()?,
            adam_v: optimizer.v.get(name).map(|v| write(".adam_v", v)).transpose()?,
        });
    }
    Ok(tensors)
}

/// Reads tensors listed by [`write_tensors`], restoring optimizer moments
/// into `optimizer`.
pub fn read_tensors(dir: &Path, tensors: &[TensorEntry], optimizer: &mut OptimizerState) -> Result<ParamStore> {
    let read = |entry: &FileEntry, p: &Param| -> Result<Vec<f64>> {
        let (r, c, data) = binio::read_f64_tensor(&entry.verify(dir)?)?;
        if (r, c) != (p.rows, p.cols) {
            return Err(Error::Checkpoint(format!("{}: shape {r}x{c}, manifest says {}x{}", entry.file, p.rows, p.cols)));
        }
        Ok(data)
    };
    let mut params = ParamStore::default();
    for t in tensors {
        let mut p = t.meta.clone();
        p.data = read(&t.file, &p)?;
        if let Some(m) = &t.adam_m {
            optimizer.m.insert(t.name.clone(), read(m, &p)?);
        }
        if let Some(v) = &t.adam_v {
            optimizer.v.insert(t.name.clone(), read(v, &p)?);
        }
        params.insert(t.name.clone(), p);
    }
    Ok(params)
}

impl ModelState {
    /// Writes `model.json` plus one little-endian f64 tensor file per
    /// parameter and per optimizer moment.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.to_string(),
            fingerprint: format!("{:016x}", self.spec.fingerprint()),
            spec: self.spec.clone(),
            optimizer: self.optimizer.clone(),
            tensors: write_tensors(dir, &self.params, &self.optimizer)?,
        };
        binio::write_json(&dir.join(CHECKPOINT_MANIFEST), &manifest)
    }

    pub fn restore(dir: &Path) -> Result<Self> {
        let manifest: CheckpointManifest = binio::read_json(&dir.join(CHECKPOINT_MANIFEST))?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown checkpoint format `{}`", manifest.format)));
        }
        let fp = format!("{:016x}", manifest.spec.fingerprint());
        if fp != manifest.fingerprint {
            return Err(Error::Checkpoint(format!("fingerprint {} does not match the stored spec ({fp})", manifest.fingerprint)));
        }
        let mut optimizer = manifest.optimizer.clone();
        let params = read_tensors(dir, &manifest.tensors, &mut optimizer)?;
        Ok(Self {
            spec: manifest.spec,
            params,
            optimizer,
        })
    }

    /// Restores and checks the checkpoint against the spec the caller expects.
    pub fn restore_compatible(dir: &Path, expected: &ModelSpec) -> Result<Self> {
        let state = Self::restore(dir)?;
        state.check_compatible(expected)?;
        Ok(state)
    }
}
