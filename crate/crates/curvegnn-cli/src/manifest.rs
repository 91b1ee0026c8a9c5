//! Run manifests: a config echo plus content hashes of every input file,
//! enough to reproduce a run exactly. No timestamps, so manifests are
//! byte-stable for identical runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::errors::{CliError, CliResult};

pub struct Manifest {
    command: String,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl ToString>) -> &mut Self {
        if let Some(v) = value {
            self.config.insert(key.to_string(), v.to_string());
        }
        self
    }

    pub fn input(&mut self, path: &Path) -> CliResult<&mut Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::usage(format!("cannot hash input {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.insert(path.display().to_string(), hex(&digest));
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let value = serde_json::json!({
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
        });
        std::fs::write(
            path,
            serde_json::to_string_pretty(&value).expect("serializable"),
        )
        .map_err(|e| CliError::usage(format!("cannot write manifest {}: {e}", path.display())))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest location for an output file (`<out>.manifest.json`) or directory
/// (`<dir>/manifest.json`).
pub fn manifest_path_for(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out
            .file_name()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}
