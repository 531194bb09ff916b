use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub note: Option<String>,
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Option<RunConfig>,
    pub wall_time_secs: f64,
    pub suites: Vec<SuiteResult>,
    pub outputs: Vec<PathBuf>,
}

pub struct ManifestBuilder {
    started: Instant,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path, config: Option<RunConfig>) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config,
                wall_time_secs: 0.0,
                suites: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    /// Writes `text` to `out_dir/name` and lists it.
    pub fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        prodlab::io::write_text(&path, text)?;
        self.manifest.outputs.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        prodlab::io::write_json(&path, value)?;
        self.manifest.outputs.push(path);
        Ok(())
    }

    pub fn suite(&mut self, name: &str, passed: bool, note: Option<String>) {
        self.manifest.suites.push(SuiteResult {
            name: name.to_string(),
            passed,
            note,
        });
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.wall_time_secs = self.started.elapsed().as_secs_f64();
        prodlab::io::write_json(&self.out_dir.join("manifest.json"), &self.manifest)?;
        Ok(self.manifest)
    }
}
