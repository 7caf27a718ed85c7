//! Run directories and manifests.
//!
//! A command writes into a hidden staging directory beside its final
//! location and renames it into place only on success, so a failed run
//! leaves nothing behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cgolab::domain::{write_field, Field};
use cgolab::forward::{write_dtn, DtNMap};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<&'static str, String>,
    pub outputs: Vec<String>,
    pub residuals: BTreeMap<String, Option<f64>>,
}

pub struct RunDir {
    command: String,
    staging: PathBuf,
    target: PathBuf,
    outputs: Vec<String>,
    residuals: BTreeMap<String, Option<f64>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl RunDir {
    /// Outputs of `command` end up in `root/command/`.
    pub fn create(root: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let staging = root.join(format!(".{command}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| io_err(&staging, e))?;
        Ok(Self {
            command: command.into(),
            staging,
            target: root.join(command),
            outputs: Vec::new(),
            residuals: BTreeMap::new(),
        })
    }

    fn claim(&mut self, name: &str) -> Result<PathBuf, CliError> {
        if self.outputs.iter().any(|o| o == name) || name == "manifest.json" {
            return Err(CliError::Io(format!("output {name} written twice")));
        }
        self.outputs.push(name.into());
        Ok(self.staging.join(name))
    }

    pub fn field(&mut self, name: &str, field: impl Into<Field>) -> Result<(), CliError> {
        let path = self.claim(name)?;
        write_field(&field.into(), &path).map_err(|e| io_err(&path, e))
    }

    pub fn dtn(&mut self, name: &str, map: &DtNMap) -> Result<(), CliError> {
        let path = self.claim(name)?;
        write_dtn(map, &path).map_err(|e| io_err(&path, e))
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let path = self.claim(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.claim(name)?;
        write_json(&path, value)
    }

    /// Non-finite values are stored as `null`.
    pub fn residual(&mut self, name: impl Into<String>, value: f64) {
        self.residuals.insert(name.into(), value.is_finite().then_some(value));
    }

    /// Writes the manifest and moves the directory into place.
    pub fn finish(self, scenario_sha256: &str, seed: u64) -> Result<PathBuf, CliError> {
        let mut versions = BTreeMap::new();
        versions.insert("cgolab", cgolab::VERSION.to_string());
        versions.insert("cgolab-cli", env!("CARGO_PKG_VERSION").to_string());
        versions.insert("field-format", cgolab::domain::FORMAT_VERSION.to_string());
        let manifest = Manifest {
            command: self.command.clone(),
            scenario_sha256: scenario_sha256.into(),
            seed,
            versions,
            outputs: self.outputs.clone(),
            residuals: self.residuals.clone(),
        };
        write_json(&self.staging.join("manifest.json"), &manifest)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| io_err(&self.target, e))?;
        Ok(self.target.clone())
    }

    /// Removes everything written so far.
    pub fn discard(self) {
        let _ = fs::remove_dir_all(&self.staging);
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}
