//! Staged outputs: nothing is written until a run finishes, then every file
//! goes through a temporary name and a rename, followed by the manifest.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub status: RunStatus,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seed: u64,
    pub code_version: String,
    pub threads: usize,
    pub files: Vec<ManifestFile>,
}

/// Files of one run, held in memory until [`Staged::commit`].
#[derive(Debug)]
pub struct Staged {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        s.push(b'\n');
        self.add(name, s);
        Ok(())
    }

    pub fn add_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn dir(&self) -> &FsPath {
        &self.dir
    }

    /// Write the staged files and a manifest describing them.
    pub fn commit(self, mut manifest: Manifest) -> Result<Manifest> {
        fs::create_dir_all(&self.dir)?;
        manifest.files = self
            .files
            .iter()
            .map(|(n, b)| ManifestFile {
                name: n.clone(),
                bytes: b.len(),
            })
            .collect();
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
        }
        let mut m = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        m.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &m)?;
        Ok(manifest)
    }
}

pub fn write_atomic(path: &FsPath, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::from(e)
    })
}
