//! `rydqca compile`: model -> circuit, pulse program, verification report.

use std::path::Path;

use rydqca_core::compiler;
use rydqca_core::Result;

use crate::config::{self, CompileConfig};
use crate::output::{fidelity_gate, RunDir};

pub fn run(config_path: &Path, out: &Path) -> Result<()> {
    let cfg: CompileConfig = config::load(config_path, "compile")?;
    cfg.model.validate()?;

    let mut report = compiler::compile(&cfg.model, &cfg.options)?;
    let program = report.program_for(cfg.repetitions)?;

    let verification = if cfg.verify.enabled {
        Some(compiler::verify(
            &report,
            cfg.repetitions,
            &cfg.verify.to_options(),
        )?)
    } else {
        None
    };
    if let Some(v) = &verification {
        report.fidelity = Some(v.worst_fidelity);
    }

    // Artifacts land before the fidelity gate so a failing run still
    // leaves its evidence on disk.
    let mut dir = RunDir::create(out)?;
    dir.write_json("circuit.json", &report.circuit)?;
    dir.write_json("pulses.json", &program)?;
    dir.write_json("report.json", &report)?;
    if let Some(v) = &verification {
        dir.write_json("verification.json", v)?;
    }
    let seeds = [cfg.verify.seed, cfg.options.grape.seed];
    dir.finish("compile", &cfg, &seeds)?;

    println!(
        "compiled {} on {} qubits: {} segments/step, {} gate layers",
        cfg.model.variant.name(),
        report.circuit.n_qubits(),
        report.segments_per_step,
        report.circuit.layers().len(),
    );
    match &verification {
        Some(v) => {
            println!(
                "verified over {} states x {} steps: worst fidelity {:.17}, max leakage {:.3e}",
                v.n_states, v.repetitions, v.worst_fidelity, v.max_leakage
            );
            fidelity_gate(v.worst_fidelity, cfg.threshold, v.leakage_exceeded)?;
        }
        None => println!("verification skipped by config"),
    }
    Ok(())
}
