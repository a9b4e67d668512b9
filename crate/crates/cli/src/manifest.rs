//! Per-run manifest and the single end-of-run writer.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub command: String,
    pub config_hash: Option<String>,
    pub trajectory_hash: Option<String>,
    /// `solved` or `cached` for commands that need the full-model trajectory.
    pub trajectory_source: Option<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<FileEntry>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Option<Self> {
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST)).ok()?).ok()
    }

    pub fn entry(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == name)
    }

    /// True when every named file is listed and its bytes still hash to the listed value.
    pub fn verifies(&self, dir: &Path, names: &[String]) -> bool {
        names.iter().all(|n| match (self.entry(n), fs::read(dir.join(n))) {
            (Some(e), Ok(bytes)) => e.sha256 == sha256_hex(&bytes),
            _ => false,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Collects artifacts in memory and writes them, then the manifest, in one pass.
pub struct Run {
    dir: PathBuf,
    command: String,
    started: u128,
    pending: Vec<(String, Vec<u8>)>,
    /// Files already on disk that belong to this run.
    kept: Vec<String>,
    pub config_hash: Option<String>,
    pub trajectory_hash: Option<String>,
    pub trajectory_source: Option<String>,
    pub checks: Vec<Check>,
}

impl Run {
    pub fn new(dir: &Path, command: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            started: now_ms(),
            pending: Vec::new(),
            kept: Vec::new(),
            config_hash: None,
            trajectory_hash: None,
            trajectory_source: None,
            checks: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.pending.retain(|(n, _)| n != name);
        self.pending.push((name.into(), bytes.into()));
    }

    pub fn keep(&mut self, name: &str) {
        self.kept.push(name.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn finish(self) -> Result<RunManifest, CliError> {
        fs::create_dir_all(&self.dir)?;
        let mut files = Vec::new();
        for name in &self.kept {
            let bytes = fs::read(self.dir.join(name))?;
            files.push(FileEntry {
                path: name.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        for (name, bytes) in &self.pending {
            fs::write(self.dir.join(name), bytes)?;
            files.push(FileEntry {
                path: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let passed = self.passed();
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA,
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            config_hash: self.config_hash,
            trajectory_hash: self.trajectory_hash,
            trajectory_source: self.trajectory_source,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            files,
            checks: self.checks,
            passed,
        };
        fs::write(self.dir.join(MANIFEST), serde_json::to_string_pretty(&manifest).map_err(psapprox::Error::from)?)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_is_listed_and_verifiable() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::new(dir.path(), "test");
        run.add("b.csv", "x,y\n");
        run.add("a.json", "{}");
        run.checks.push(Check::new("ok", true, ""));
        let m = run.finish().unwrap();
        assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["a.json", "b.csv"]);
        assert!(m.passed);
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verifies(dir.path(), &["a.json".into(), "b.csv".into()]));
        fs::write(dir.path().join("b.csv"), "x,z\n").unwrap();
        assert!(!back.verifies(dir.path(), &["b.csv".into()]));
        assert!(!back.verifies(dir.path(), &["missing".into()]));
    }
}
