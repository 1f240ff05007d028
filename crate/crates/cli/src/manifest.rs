use std::path::{Path, PathBuf};

use bernoulli_mix::io::{atomic_write, write_json};
use serde::{Deserialize, Serialize};

/// Bumped whenever a CSV header or column meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const SWEEP_HEADER: &str = "epsilon,delta,t_mix,t_dis,method,slope_fit_running,theory_lower,theory_upper,wall_ms";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    /// CSV header, for tabular outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub csv_schema_version: u32,
    pub map: String,
    pub grid: usize,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub wall_ms: u128,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }
}

/// Collects output files and checks for one command.
pub struct Recorder {
    pub out: PathBuf,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Recorder {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf(), outputs: Vec::new(), checks: Vec::new(), warnings: Vec::new() }
    }

    pub fn text(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        atomic_write(&self.out.join(name), body.as_bytes())?;
        self.outputs.push(OutputFile { path: name.to_string(), schema: None });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        atomic_write(&self.out.join(name), body.as_bytes())?;
        let header = body.lines().next().unwrap_or_default().to_string();
        self.outputs.push(OutputFile { path: name.to_string(), schema: Some(header) });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        write_json(&self.out.join(name), value)?;
        self.outputs.push(OutputFile { path: name.to_string(), schema: None });
        Ok(())
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }
}
