//! Artifact directory: tables, results, metadata, manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

/// Version of the file layout described in SCHEMA.md.
pub const SCHEMA_VERSION: &str = "1.0.0";

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// A CSV table held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn from_rows<R: Serialize>(name: &'static str, rows: &[R]) -> Result<Self, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        Ok(Self { name, bytes })
    }
}

/// Status of one point of a grid or sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStatus {
    pub label: String,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl PointStatus {
    pub fn new<T>(label: String, result: &Result<T, Failure>) -> Self {
        Self { label, complete: result.is_ok(), error: result.as_ref().err().map(|e| e.to_string()), dir: None }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: &'static str,
    pub config_hash: &'a str,
    pub kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<&'a str>,
    pub complete: bool,
    pub points: &'a [PointStatus],
}

pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, table: &Table) -> Result<(), Failure> {
        self.write(&format!("{}.csv", table.name), &table.bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
