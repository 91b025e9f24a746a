//! Run manifests and staged output directories.
//!
//! Outputs are first written under temporary names. The manifest listing
//! them is written next, and only then are the outputs renamed into place,
//! so a directory never holds a finished output that its manifest does not
//! describe.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
const PARTIAL_SUFFIX: &str = ".partial";

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct OutputError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the resolved configuration.
    pub config_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub command: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_hash: String, command: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command,
            outputs: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    staged: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn partial(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}{PARTIAL_SUFFIX}"))
    }

    pub fn stage(&mut self, name: &str, contents: &str) -> Result<(), OutputError> {
        let path = self.partial(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.staged.push(name.to_owned());
        Ok(())
    }

    /// Writes the manifest, then moves every staged file to its final name.
    pub fn commit(self, mut manifest: RunManifest) -> Result<Vec<PathBuf>, OutputError> {
        manifest.outputs = self.staged.clone();
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, json).map_err(io_err(&path))?;
        let mut done = Vec::with_capacity(self.staged.len());
        for name in &self.staged {
            let to = self.dir.join(name);
            fs::rename(self.partial(name), &to).map_err(io_err(&to))?;
            done.push(to);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_outputs_and_outputs_land() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&tmp.path().join("run")).unwrap();
        out.stage("a.csv", "x\n1\n").unwrap();
        out.stage("b.csv", "y\n2\n").unwrap();
        assert!(!out.path().join("a.csv").exists());
        let files = out.commit(RunManifest::new("abc".into(), vec!["sweep".into()])).unwrap();
        assert_eq!(files.len(), 2);
        let dir = tmp.path().join("run");
        assert_eq!(fs::read_to_string(dir.join("b.csv")).unwrap(), "y\n2\n");
        assert!(!dir.join("a.csv.partial").exists());
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m["outputs"], serde_json::json!(["a.csv", "b.csv"]));
        assert_eq!(m["config_hash"], "abc");
    }
}
