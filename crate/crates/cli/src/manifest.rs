use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Record of one run, written after every other output exists.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub params: Value,
    pub version: &'static str,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

pub struct Run {
    command: &'static str,
    started: Instant,
    inputs: Vec<String>,
    params: Value,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &'static str, params: Value) -> Self {
        Self {
            command,
            started: Instant::now(),
            inputs: Vec::new(),
            params,
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Adds a key to the echoed parameters.
    pub fn record(&mut self, key: &str, value: serde_json::Value) {
        self.params[key] = value;
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        write_file(path, contents)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes the manifest next to `primary` and returns its path.
    pub fn finish(self, primary: &Path) -> Result<PathBuf, CliError> {
        let path = sibling(primary, "manifest.json");
        let manifest = RunManifest {
            command: self.command.to_owned(),
            inputs: self.inputs,
            params: self.params,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_file(&path, &text)?;
        Ok(path)
    }
}

/// `dir/stem.suffix` for `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = contents.to_owned();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
