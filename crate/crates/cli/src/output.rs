//! Deterministic artifact writing: CSV tables, JSON documents, manifests.
//!
//! Floats are rendered with 17 significant digits so a value survives a
//! parse round trip exactly, and nothing here depends on wall-clock time;
//! re-running a config reproduces every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use rydqca_core::{Error, Result};

use crate::config::Manifest;

/// Shortest representation that parses back to the same f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table under construction: header first, then rows.
pub struct Csv {
    body: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            body: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(cell);
        }
        let _ = writeln!(self.body, "{line}");
    }

    pub fn into_body(self) -> String {
        self.body
    }
}

/// Accumulates the output directory contents and finishes with a manifest.
pub struct RunDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_csv(&mut self, name: &str, csv: Csv) -> Result<()> {
        self.write_raw(name, csv.into_body())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_raw(name, text)
    }

    fn write_raw(&mut self, name: &str, body: String) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes the manifest last so its output list is complete.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, seeds: &[u64]) -> Result<()> {
        let name = "manifest.json";
        self.written.push(name.to_string());
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            seeds: seeds.to_vec(),
            outputs: self.written.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

/// Hex prefix of the SHA-256 of a document's canonical JSON; tags CSV rows
/// with the identity of the model that produced them.
pub fn short_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(value)?;
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}

/// Maps a failed fidelity gate onto the numeric-failure exit path.
pub fn fidelity_gate(worst: f64, threshold: f64, leaky: bool) -> Result<()> {
    if leaky {
        return Err(Error::numeric(format!(
            "ancilla leakage exceeded the configured limit (worst fidelity {worst:.3e})"
        )));
    }
    if worst < threshold {
        return Err(Error::numeric(format!(
            "verified fidelity {worst:.17} fell below threshold {threshold:.17}"
        )));
    }
    Ok(())
}
