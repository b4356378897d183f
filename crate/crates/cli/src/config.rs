//! Experiment config schemas and the manifest-aware loader.
//!
//! Every config is strict: unknown keys are rejected so a typo cannot pass
//! silently as a default. A manifest written by a previous run doubles as a
//! config for the same command, which makes any run reproducible from its
//! own output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rydqca_core::compiler::{CompileOptions, QcaModel};
use rydqca_core::control::ScanConfig;
use rydqca_core::lattice::{GadgetAssignment, LatticeSpec};
use rydqca_core::pxp::EvolveOptions;
use rydqca_core::{Error, Observable, Result};

/// Record written next to every run's outputs. Contains no timestamps, so
/// a re-run reproduces it byte for byte.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    /// Seeds the run consumed, in the order they were drawn from the config.
    pub seeds: Vec<u64>,
    /// File names written into the output directory, manifest included.
    pub outputs: Vec<String>,
}

/// Reads `path` as either a bare config or a manifest wrapping one.
pub fn load<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let config_value = match &value {
        serde_json::Value::Object(map) if map.contains_key("command") => {
            let manifest: Manifest = serde_json::from_value(value.clone())?;
            if manifest.command != command {
                return Err(Error::config(format!(
                    "manifest at {} was written by `{}`, not `{command}`",
                    path.display(),
                    manifest.command
                )));
            }
            manifest.config
        }
        _ => value,
    };
    Ok(serde_json::from_value(config_value)?)
}

/// Resolves a path found inside a config relative to the config file itself.
pub fn resolve_relative(config_path: &Path, inner: &Path) -> PathBuf {
    if inner.is_absolute() {
        inner.to_path_buf()
    } else {
        match config_path.parent() {
            Some(dir) => dir.join(inner),
            None => inner.to_path_buf(),
        }
    }
}

fn default_repetitions() -> usize {
    1
}

/// Fidelity floor for a compile or verify run to count as a success.
fn default_fidelity_threshold() -> f64 {
    1.0 - 1e-6
}

/// Verification knobs plus an escape hatch to skip the check entirely.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub enabled: bool,
    /// Random test states appended to the full computational basis.
    pub random_states: usize,
    pub seed: u64,
    /// Ancilla population above this marks the run as leaky.
    pub leakage_limit: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        let base = rydqca_core::compiler::VerifyOptions::default();
        VerifySettings {
            enabled: true,
            random_states: base.random_states,
            seed: base.seed,
            leakage_limit: base.leakage_limit,
        }
    }
}

impl VerifySettings {
    pub fn to_options(&self) -> rydqca_core::compiler::VerifyOptions {
        rydqca_core::compiler::VerifyOptions {
            random_states: self.random_states,
            seed: self.seed,
            evolve: EvolveOptions::default(),
            leakage_limit: self.leakage_limit,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    pub model: QcaModel,
    #[serde(default)]
    pub options: CompileOptions,
    /// Steps both exported as a pulse program and verified.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub verify: VerifySettings,
    /// Worst-case verified fidelity must reach this for exit code 0.
    #[serde(default = "default_fidelity_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Compilation report artifact, relative to this config file.
    pub report: PathBuf,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default = "default_fidelity_threshold")]
    pub threshold: f64,
}

fn default_rabi() -> f64 {
    1.0
}

fn default_scan_steps() -> usize {
    40
}

fn default_scan_threshold() -> f64 {
    1e-10
}

/// Scan-control knobs, mirrored with defaults so configs can stay partial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub seed: u64,
    pub initial_restarts: usize,
    pub bisection_tol: Option<f64>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        let base = ScanConfig::default();
        ScanSettings {
            seed: base.seed,
            initial_restarts: base.initial_restarts,
            bisection_tol: base.bisection_tol,
        }
    }
}

impl ScanSettings {
    pub fn to_config(&self) -> ScanConfig {
        ScanConfig {
            seed: self.seed,
            initial_restarts: self.initial_restarts,
            bisection_tol: self.bisection_tol,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrapeScanConfig {
    /// Gadget sizes driven simultaneously; pairwise distinct.
    pub sizes: Vec<usize>,
    /// The size whose return phase sweeps `phi_grid`.
    pub target_size: usize,
    /// Return phases for the remaining sizes; zero when absent.
    #[serde(default)]
    pub base_phases: Option<Vec<f64>>,
    pub phi_grid: Vec<f64>,
    /// Durations to scan, strictly descending.
    pub t_grid: Vec<f64>,
    #[serde(default = "default_rabi")]
    pub rabi: f64,
    #[serde(default = "default_scan_steps")]
    pub steps: usize,
    #[serde(default = "default_scan_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub scan: ScanSettings,
}

fn default_chaos_seed() -> u64 {
    17
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChaosMode {
    /// Monte Carlo over random tetrahedral product states.
    Sampled {
        n_samples: usize,
        #[serde(default = "default_chaos_seed")]
        seed: u64,
        /// Projective shots per expectation value; 0 reads it out exactly.
        #[serde(default)]
        shots: usize,
    },
    /// Dense Heisenberg evolution; also emits the full size distribution.
    Exact,
    /// Stabilizer propagation; couplings must sit on the Clifford grid.
    Clifford,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub model: QcaModel,
    pub observable: Observable,
    pub t_max: usize,
    pub mode: ChaosMode,
}

fn default_exponent() -> f64 {
    6.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditSource {
    /// Dual-species array realized from a lattice and a gadget assignment.
    Gadget {
        lattice: LatticeSpec,
        gadgets: GadgetAssignment,
    },
    /// Single-species chain laid out for nearest-neighbor blockade.
    SingleSpeciesChain { n: usize },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub source: AuditSource,
    /// Interaction power law; 6 for van der Waals tails.
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    /// Moment orders to tabulate, each between 1 and 8.
    pub orders: Vec<usize>,
}
