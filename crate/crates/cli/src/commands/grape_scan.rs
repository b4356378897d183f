//! `rydqca grape-scan`: time-optimal pulse durations over a phase grid.
//!
//! For each swept phase the scan walks the duration grid downward with warm
//! starts and reports the shortest feasible duration. Phases run in
//! parallel; results are collected in grid order, so the output does not
//! depend on the thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use rydqca_core::control::{time_optimal_scan, GrapeProblem, ScanOutcome};
use rydqca_core::{Error, Result};

use crate::config::{self, GrapeScanConfig};
use crate::output::{fmt_float, Csv, RunDir};

#[derive(Serialize)]
struct ScanRecord {
    phi: f64,
    outcome: ScanOutcome,
}

pub fn run(config_path: &Path, out: &Path) -> Result<()> {
    let cfg: GrapeScanConfig = config::load(config_path, "grape-scan")?;
    if cfg.phi_grid.is_empty() {
        return Err(Error::config("phi grid must be nonempty"));
    }
    let target_index = cfg
        .sizes
        .iter()
        .position(|&s| s == cfg.target_size)
        .ok_or_else(|| {
            Error::config(format!(
                "target size {} is not among the scanned sizes {:?}",
                cfg.target_size, cfg.sizes
            ))
        })?;
    let base = match &cfg.base_phases {
        Some(phases) => {
            if phases.len() != cfg.sizes.len() {
                return Err(Error::config(format!(
                    "base_phases has {} entries for {} sizes",
                    phases.len(),
                    cfg.sizes.len()
                )));
            }
            phases.clone()
        }
        None => vec![0.0; cfg.sizes.len()],
    };

    let scan_config = cfg.scan.to_config();
    let records: Vec<ScanRecord> = cfg
        .phi_grid
        .par_iter()
        .map(|&phi| {
            let mut targets = base.clone();
            targets[target_index] = phi;
            let template = GrapeProblem {
                sizes: cfg.sizes.clone(),
                target_phases: targets,
                rabi: cfg.rabi,
                total_time: cfg.t_grid[0],
                steps: cfg.steps,
                threshold: cfg.threshold,
            };
            let outcome = time_optimal_scan(&template, &cfg.t_grid, &scan_config)?;
            Ok(ScanRecord { phi, outcome })
        })
        .collect::<Result<_>>()?;

    let mut err_curve = Csv::new(&["phi", "total_time", "error", "converged"]);
    for record in &records {
        for point in &record.outcome.points {
            err_curve.row(&[
                fmt_float(record.phi),
                fmt_float(point.total_time),
                fmt_float(point.error),
                point.converged.to_string(),
            ]);
        }
    }

    let mut tmin = Csv::new(&["phi", "t_min", "best_error", "feasibility_threshold"]);
    for record in &records {
        tmin.row(&[
            fmt_float(record.phi),
            match record.outcome.t_min {
                Some(t) => fmt_float(t),
                None => "nan".to_string(),
            },
            fmt_float(record.outcome.best_error),
            fmt_float(record.outcome.feasibility_threshold),
        ]);
    }

    let mut dir = RunDir::create(out)?;
    dir.write_csv("err_curve.csv", err_curve)?;
    dir.write_csv("tmin.csv", tmin)?;
    dir.write_json("scan.json", &records)?;
    dir.finish("grape-scan", &cfg, &[cfg.scan.seed])?;

    let feasible = records
        .iter()
        .filter(|r| r.outcome.t_min.is_some())
        .count();
    println!(
        "scanned {} phases over {} durations: {} feasible",
        records.len(),
        cfg.t_grid.len(),
        feasible
    );
    Ok(())
}
