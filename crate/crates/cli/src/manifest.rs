//! `manifest.json`: what was run, on which inputs, producing which files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    /// False for files carrying wall-clock timings.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments exactly as given, for re-running.
    pub args: Vec<String>,
    /// Every option after defaults were applied.
    pub flags: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_bytes(&bytes),
        bytes: bytes.len() as u64,
    })
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            tool: "mdport".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            flags: BTreeMap::new(),
            seed: None,
            threads: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.into(), value.to_string());
    }

    pub fn add_output(&mut self, dir: &Path, file: &str, deterministic: bool) -> Result<(), CliError> {
        let path = dir.join(file);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(OutputDigest {
            file: file.into(),
            sha256: sha256_bytes(&bytes),
            deterministic,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
