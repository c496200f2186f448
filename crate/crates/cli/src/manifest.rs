//! Run manifests and atomic output writing.
//!
//! Every subcommand that produces files also writes `<out>.manifest.json`
//! next to its primary output, recording the resolved configuration and a
//! SHA-256 of each input, so identical argv + identical inputs can be
//! recognized by manifest equality.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use patchlens::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    /// input path → sha256 of its bytes
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: impl Serialize) -> Manifest {
        Manifest {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serialization"),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let mut h = Sha256::new();
        h.update(&bytes);
        self.inputs
            .insert(path.display().to_string(), format!("{:x}", h.finalize()));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write the manifest as `<primary>.manifest.json`.
    pub fn write(&self, primary: &Path) -> Result<()> {
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary.with_file_name(name);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("manifest serialization: {e}")))?;
        atomic_write(&path, text.as_bytes())
    }
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}
