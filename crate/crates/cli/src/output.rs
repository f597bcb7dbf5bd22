use crate::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "fracpara/manifest-v1";

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `<=`, `>=` or `>` against `threshold`.
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: "<=", threshold, pass: measured <= threshold }
    }

    pub fn above(name: &str, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: ">", threshold, pass: measured > threshold }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: ">=", threshold, pass: measured >= threshold }
    }
}

/// Checks decide the exit code; measurements are reported only.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub measurements: BTreeMap<String, f64>,
    pub timings: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn measure(&mut self, name: &str, value: f64) {
        self.measurements.insert(name.into(), value);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub schema: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub artifacts: Vec<Artifact>,
    pub timings: BTreeMap<String, f64>,
    pub total_seconds: f64,
    pub checks: Vec<Check>,
    pub measurements: BTreeMap<String, f64>,
    pub exit_code: u8,
    pub error: Option<String>,
}

impl<'a> RunManifest<'a> {
    pub fn new(
        command: &'a str,
        config: &'a RunConfig,
        artifacts: Vec<Artifact>,
        outcome: Outcome,
        total_seconds: f64,
        exit_code: u8,
        error: Option<String>,
    ) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA,
            command,
            seed: config.seed,
            config,
            artifacts,
            timings: outcome.timings,
            total_seconds,
            checks: outcome.checks,
            measurements: outcome.measurements,
            exit_code,
            error,
        }
    }
}

/// Output directory that hashes every file written through it.
pub struct Output {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Output {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.record(name)?;
        Ok(path)
    }

    /// Hashes a file that a library routine already wrote into the directory.
    pub fn record(&mut self, name: &str) -> std::io::Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact { path: name.into(), bytes: bytes.len() as u64, sha256 });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        self.artifacts.clone()
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(self.dir.join(MANIFEST), text)
    }
}

/// Rows of `{:.17e}` numbers under a header, for byte-stable CSV output.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
