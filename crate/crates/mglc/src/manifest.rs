//! `manifest.json`: the config hash plus size and SHA-256 of every file in
//! an output directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::hex;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    /// Inventories `dir` (sorted, excluding any previous manifest).
    pub fn scan(dir: &Path, command: &str, config_hash: &str) -> Result<Self> {
        let mut files = Vec::new();
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| Error::Data(e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(dir).expect("walk stays inside dir");
            if rel == Path::new(MANIFEST) {
                continue;
            }
            let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            files.push(FileEntry { path, bytes: bytes.len() as u64, sha256: hex(&Sha256::digest(&bytes)) });
        }
        Ok(Self { command: command.to_string(), config_hash: config_hash.to_string(), files })
    }

    pub fn write(dir: &Path, command: &str, config_hash: &str) -> Result<Self> {
        let m = Self::scan(dir, command, config_hash)?;
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(m)
    }
}
