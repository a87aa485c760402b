use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use esig_core::repro::sha256_hex;
use serde::Serialize;

use crate::failure::{Classify, Failure};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one invocation. Contains no timestamps or absolute output
/// paths, so identical runs produce identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Flag values that shaped the run, including config file paths.
    pub args: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

/// Collects outputs written under one directory and emits `manifest.json`
/// last.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn new(command: &str, dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).or_usage(format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                args: BTreeMap::new(),
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn arg(&mut self, name: &str, value: impl ToString) {
        self.manifest.args.insert(name.to_string(), value.to_string());
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path).or_usage(format!("cannot read {}", path.display()))?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).or_usage(format!("cannot create {}", parent.display()))?;
        }
        fs::write(&path, bytes).or_usage(format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(FileDigest {
            path: relative.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, json).or_usage(format!("cannot write {}", path.display()))
    }
}
