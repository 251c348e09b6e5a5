//! Dataset directory layout: one instance JSON per file plus a manifest
//! listing file names and scenario counts.

use super::{Instance, Scenario};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REJECTED_DIR: &str = "rejected";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    BadManifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub id: String,
    pub scenario: Scenario,
}

/// Dataset manifest: instance files, per-scenario counts, and files moved
/// aside by annotation (ties and degenerate single-candidate instances).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub counts: BTreeMap<String, usize>,
    pub instances: Vec<ManifestEntry>,
    #[serde(default)]
    pub rejected: Vec<String>,
}

impl Manifest {
    pub fn from_entries(mut instances: Vec<ManifestEntry>, rejected: Vec<String>) -> Self {
        instances.sort_by(|a, b| a.file.cmp(&b.file));
        let mut counts = BTreeMap::new();
        for e in &instances {
            *counts.entry(e.scenario.to_string()).or_insert(0) += 1;
        }
        let mut rejected = rejected;
        rejected.sort();
        Self {
            counts,
            instances,
            rejected,
        }
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::BadManifest(e.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }
}

/// Write-temp-then-rename so concurrent workers and interrupted runs never
/// leave half-written files behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn load_instance(path: &Path) -> Result<Instance, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Instance::from_json(&text)
        .map_err(|e| DatasetError::Malformed(format!("{}: {e}", path.display())))
}

pub fn save_instance(dir: &Path, inst: &Instance) -> Result<String, DatasetError> {
    let file = format!("{}.json", inst.id);
    write_atomic(&dir.join(&file), inst.to_json().as_bytes())?;
    Ok(file)
}

/// Load every instance listed in the manifest, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<(Manifest, Vec<Instance>), DatasetError> {
    let manifest = Manifest::load(dir)?;
    let mut instances = Vec::with_capacity(manifest.instances.len());
    for entry in &manifest.instances {
        let inst = load_instance(&dir.join(&entry.file))?;
        if inst.id != entry.id {
            return Err(DatasetError::BadManifest(format!(
                "{}: manifest id {} does not match instance id {}",
                entry.file, entry.id, inst.id
            )));
        }
        instances.push(inst);
    }
    Ok((manifest, instances))
}
