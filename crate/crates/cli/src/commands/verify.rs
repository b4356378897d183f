//! `rydqca verify`: fresh verification pass over a saved compilation report.

use std::fs;
use std::path::Path;

use rydqca_core::compiler::{self, CompilationReport};
use rydqca_core::{Error, Result};

use crate::config::{self, VerifyConfig};
use crate::output::{fidelity_gate, RunDir};

pub fn run(config_path: &Path, out: &Path) -> Result<()> {
    let mut cfg: VerifyConfig = config::load(config_path, "verify")?;
    let report_path = config::resolve_relative(config_path, &cfg.report);
    let report_path = fs::canonicalize(&report_path)
        .map_err(|e| Error::config(format!("cannot resolve {}: {e}", report_path.display())))?;
    // The manifest records the absolute artifact path so it re-runs from
    // its own directory, which is not where the original config lived.
    cfg.report = report_path.clone();
    let text = fs::read_to_string(&report_path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", report_path.display())))?;
    let report: CompilationReport = serde_json::from_str(&text)?;
    report.model.validate()?;

    let verification = compiler::verify(&report, cfg.repetitions, &cfg.verify.to_options())?;

    let mut dir = RunDir::create(out)?;
    dir.write_json("verification.json", &verification)?;
    dir.finish("verify", &cfg, &[cfg.verify.seed])?;

    println!(
        "verified over {} states x {} steps: worst fidelity {:.17}, max leakage {:.3e}",
        verification.n_states,
        verification.repetitions,
        verification.worst_fidelity,
        verification.max_leakage
    );
    fidelity_gate(
        verification.worst_fidelity,
        cfg.threshold,
        verification.leakage_exceeded,
    )
}
