//! Reproducibility record written next to every report set.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use gridworth_core::valuation::ErrorMode;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl FileRecord {
    pub fn new(role: impl Into<String>, path: impl Into<String>, bytes: &[u8]) -> Self {
        Self { role: role.into(), path: path.into(), sha256: sha256_hex(bytes) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalendarParams {
    pub timezone: String,
    pub extra_exclusion_dates: Vec<String>,
}

/// Everything needed to rerun a report and check its outputs. Contains no
/// wall-clock data so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisRun {
    pub command: &'static str,
    pub inputs: Vec<FileRecord>,
    pub calendar: Option<CalendarParams>,
    pub schedule_id: Option<String>,
    pub reference_year: Option<i32>,
    pub error_mode: Option<ErrorMode>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// Report files, relative to the output directory.
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that remembers what was written to it.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create output directory", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| path.display().to_string())?;
        self.written.push(FileRecord::new("report", name, bytes));
        Ok(())
    }

    pub fn finish(self, mut run: AnalysisRun) -> Result<()> {
        run.outputs = self.written;
        let mut json = serde_json::to_string_pretty(&run).expect("manifest serializes");
        json.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, json).with_context(|| path.display().to_string())
    }
}
