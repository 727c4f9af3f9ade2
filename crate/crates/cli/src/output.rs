use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;
use sha2::{Digest, Sha256};
use urllc_core::io::CsvTable;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory plus the files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Record a file written directly by the caller.
    pub fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn text(&mut self, name: &str, content: &str) -> anyhow::Result<()> {
        let path = self.path(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.register(name);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> anyhow::Result<()> {
        self.text(name, &table.render())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn write_manifest(&mut self, m: &Manifest) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(m)?;
        s.push('\n');
        let path = self.path(MANIFEST_FILE);
        std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "urllc-lab")]
    pub lab: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    /// Arguments after the program name.
    pub command_line: Vec<String>,
    /// SHA-256 of the resolved command (defaults filled in) and seed.
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &C, seed: u64, outputs: &[String], wall_seconds: Option<f64>) -> anyhow::Result<Self> {
        Ok(Self {
            command_line: std::env::args().skip(1).collect(),
            config_hash: config_hash(command, seed)?,
            seed,
            versions: Versions {
                lab: env!("CARGO_PKG_VERSION"),
            },
            wall_seconds,
            outputs: outputs.to_vec(),
        })
    }
}

pub fn config_hash<C: Serialize>(command: &C, seed: u64) -> anyhow::Result<String> {
    let canonical = serde_json::to_string(&(command, seed))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}
