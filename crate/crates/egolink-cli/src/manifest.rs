//! Run manifests: enough context next to every output to reproduce it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// The fully resolved configuration the run actually used.
    pub config: serde_json::Value,
    /// Input path to hex SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config,
            inputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: 0.0,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(e.to_string(), path))?;
        self.inputs.insert(path.display().to_string(), hex_sha256(&bytes));
        Ok(())
    }

    /// Records every regular file under a directory, in sorted order.
    pub fn record_input_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::io(e.to_string(), dir))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            self.record_input(&f)?;
        }
        Ok(())
    }

    /// Writes the manifest next to `output`: inside it when it is a
    /// directory, as `<stem>.manifest.json` beside it otherwise.
    pub fn write_next_to(&self, output: &Path) -> Result<(), CliError> {
        let path = if output.is_dir() {
            output.join("manifest.json")
        } else {
            let stem = output
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_string());
            output.with_file_name(format!("{stem}.manifest.json"))
        };
        let mut body = serde_json::to_vec_pretty(self).expect("manifest serializes");
        body.push(b'\n');
        fs::write(&path, body).map_err(|e| CliError::io(e.to_string(), &path))
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
