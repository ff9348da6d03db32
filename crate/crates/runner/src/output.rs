//! Run directory writer and manifest.
//!
//! All artifact bytes go through [`RunOutput`], which records a SHA-256 per
//! file. The manifest itself and the `plots/` directory are not listed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RunError};

pub const MANIFEST: &str = "manifest.json";
pub const PLOTS_DIR: &str = "plots";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub master_seed: u64,
    pub config_digest: String,
    /// `"complete"` or `"failed: <reason>"`.
    pub status: String,
    pub phases: Vec<Phase>,
    pub learning_rates: BTreeMap<String, f64>,
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunOutput {
    root: PathBuf,
    files: BTreeMap<String, String>,
    phases: Vec<Phase>,
    learning_rates: BTreeMap<String, f64>,
}

impl RunOutput {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| RunError::io(root, e))?;
        Ok(RunOutput {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
            phases: Vec::new(),
            learning_rates: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// List a file produced outside this writer (trajectory spill files).
    pub fn adopt(&mut self, rel: &str) -> Result<()> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).map_err(|e| RunError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn record_lr(&mut self, label: &str, lr: f64) {
        self.learning_rates.insert(label.to_string(), lr);
    }

    pub fn learning_rates(&self) -> &BTreeMap<String, f64> {
        &self.learning_rates
    }

    pub fn record_phase(&mut self, name: &str, seconds: f64) {
        self.phases.push(Phase {
            name: name.to_string(),
            seconds,
        });
    }

    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.phases.push(Phase {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn finish(self, experiment: &str, master_seed: u64, config_digest: String, status: String) -> Result<RunManifest> {
        let manifest = RunManifest {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config_digest,
            status,
            phases: self.phases,
            learning_rates: self.learning_rates,
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.root.join(MANIFEST);
        std::fs::write(&path, text + "\n").map_err(|e| RunError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest> {
    let path = run_dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::Verify(format!("{}: {e}", path.display())))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| RunError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| RunError::io(dir, e))?;
        let path = entry.path();
        let rel = path
            .strip_prefix(root)
            .expect("walk stays under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if path.is_dir() {
            if rel != PLOTS_DIR {
                collect_files(root, &path, out)?;
            }
        } else if rel != MANIFEST {
            out.push(rel);
        }
    }
    Ok(())
}

/// Re-hash the run directory and compare against its manifest. Returns the
/// number of files checked.
pub fn verify_run(run_dir: &Path) -> Result<usize> {
    let manifest = read_manifest(run_dir)?;
    let mut on_disk = Vec::new();
    collect_files(run_dir, run_dir, &mut on_disk)?;
    on_disk.sort();
    let listed: Vec<String> = manifest.files.keys().cloned().collect();
    if on_disk != listed {
        let extra: Vec<&String> = on_disk.iter().filter(|f| !manifest.files.contains_key(*f)).collect();
        let missing: Vec<&String> = listed.iter().filter(|f| !on_disk.contains(f)).collect();
        return Err(RunError::Verify(format!("unlisted files {extra:?}, missing files {missing:?}")));
    }
    for (rel, expected) in &manifest.files {
        let path = run_dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| RunError::io(&path, e))?;
        let actual = sha256_hex(&bytes);
        if &actual != expected {
            return Err(RunError::Verify(format!("{rel}: checksum {actual} != {expected}")));
        }
    }
    Ok(manifest.files.len())
}
