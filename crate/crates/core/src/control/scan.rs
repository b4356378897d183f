//! Minimum-duration search for simultaneous phase gates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::grape::{grape_optimize, GrapeProblem, GrapeResult};

/// Multiplicative slack on the problem threshold when classifying a scan
/// point as feasible.
pub const FEASIBILITY_SLACK: f64 = 1.01;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Seed for random restarts; every derived stream is deterministic.
    pub seed: u64,
    /// Random starts tried at the first (longest) grid duration.
    pub initial_restarts: usize,
    /// Bisection stopping width; defaults to 1e-3 / Omega when absent.
    pub bisection_tol: Option<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            seed: 7,
            initial_restarts: 5,
            bisection_tol: None,
        }
    }
}

/// One optimized grid point of the duration scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub total_time: f64,
    pub error: f64,
    pub converged: bool,
    pub xi: Vec<f64>,
}

/// Scan outcome: the residual-error curve over the grid plus the refined
/// minimum feasible duration, when one exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub points: Vec<ScanPoint>,
    pub t_min: Option<f64>,
    pub xi_at_t_min: Option<Vec<f64>>,
    pub best_error: f64,
    pub feasibility_threshold: f64,
}

fn optimize_at(
    template: &GrapeProblem,
    total_time: f64,
    warm: Option<&[f64]>,
    seed: u64,
) -> Result<GrapeResult> {
    let mut problem = template.clone();
    problem.total_time = total_time;
    grape_optimize(&problem, warm, seed)
}

/// Walks a strictly descending duration grid, warm-starting each point from
/// the previous optimum, then refines the feasibility boundary by bisection.
/// The boundary is approached from the feasible side: every bisection probe
/// is warm-started from the best profile at the current feasible end, and
/// symmetric targets can be scanned from either sign with matching results.
pub fn time_optimal_scan(
    template: &GrapeProblem,
    t_grid: &[f64],
    config: &ScanConfig,
) -> Result<ScanOutcome> {
    template.validate()?;
    if t_grid.is_empty() {
        return Err(Error::config("duration grid must be nonempty"));
    }
    for w in t_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::config("duration grid must be strictly descending"));
        }
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::config("durations must be positive and finite"));
    }
    let feasibility = FEASIBILITY_SLACK * template.threshold;
    let tol = match config.bisection_tol {
        Some(t) if t > 0.0 => t,
        Some(_) => return Err(Error::config("bisection tolerance must be positive")),
        None => 1e-3 / template.rabi,
    };

    let mut points: Vec<ScanPoint> = Vec::with_capacity(t_grid.len());
    let mut warm: Option<Vec<f64>> = None;
    let mut seed_stream = config.seed;
    for (idx, &t) in t_grid.iter().enumerate() {
        let mut best: Option<GrapeResult> = None;
        let attempts = if idx == 0 {
            config.initial_restarts.max(1)
        } else {
            1
        };
        if let Some(w) = &warm {
            let r = optimize_at(template, t, Some(w), seed_stream)?;
            best = Some(r);
        }
        let mut remaining = attempts;
        while remaining > 0 && best.as_ref().map_or(true, |b| b.error >= feasibility) {
            seed_stream = seed_stream.wrapping_add(1);
            let r = optimize_at(template, t, None, seed_stream)?;
            if best.as_ref().map_or(true, |b| r.error < b.error) {
                best = Some(r);
            }
            remaining -= 1;
        }
        let best = best.expect("at least one attempt ran");
        if best.error < feasibility {
            warm = Some(best.xi.clone());
        }
        points.push(ScanPoint {
            total_time: t,
            error: best.error,
            converged: best.converged,
            xi: best.xi,
        });
    }

    let best_error = points.iter().map(|p| p.error).fold(f64::INFINITY, f64::min);
    // Smallest feasible grid duration, requiring every longer grid point
    // before it in scan order to have been classified already.
    let feasible_idx = points
        .iter()
        .rposition(|p| p.error < feasibility);
    let Some(fi) = feasible_idx else {
        return Ok(ScanOutcome {
            points,
            t_min: None,
            xi_at_t_min: None,
            best_error,
            feasibility_threshold: feasibility,
        });
    };

    let mut hi = points[fi].total_time;
    let mut hi_xi = points[fi].xi.clone();
    let infeasible_below = points[fi + 1..].iter().find(|p| p.error >= feasibility);
    if let Some(lo_point) = infeasible_below {
        let mut lo = lo_point.total_time;
        while hi - lo > tol {
            let mid = 0.5 * (hi + lo);
            let mut r = optimize_at(template, mid, Some(&hi_xi), seed_stream)?;
            if r.error >= feasibility {
                // Near-threshold stalls happen; one fresh start before
                // classifying the midpoint as infeasible.
                seed_stream = seed_stream.wrapping_add(1);
                let retry = optimize_at(template, mid, None, seed_stream)?;
                if retry.error < r.error {
                    r = retry;
                }
            }
            if r.error < feasibility {
                hi = mid;
                hi_xi = r.xi;
            } else {
                lo = mid;
            }
        }
    }
    Ok(ScanOutcome {
        points,
        t_min: Some(hi),
        xi_at_t_min: Some(hi_xi),
        best_error,
        feasibility_threshold: feasibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_must_descend() {
        let p = GrapeProblem::new(vec![1], vec![PI], 1.0, 5.0).unwrap();
        assert!(time_optimal_scan(&p, &[3.0, 4.0], &ScanConfig::default()).is_err());
        assert!(time_optimal_scan(&p, &[], &ScanConfig::default()).is_err());
    }

    #[test]
    fn single_size_pi_gate_hits_the_resonant_duration() {
        let p = GrapeProblem::new(vec![1], vec![PI], 1.0, 8.0).unwrap();
        let grid = [8.0, 7.0, 6.5, 6.25, 6.0];
        let out = time_optimal_scan(&p, &grid, &ScanConfig::default()).unwrap();
        let t_min = out.t_min.expect("feasible scan");
        assert!(
            (t_min - 2.0 * PI).abs() < 2e-2,
            "t_min {t_min} vs {}",
            2.0 * PI
        );
        assert!(out.points.len() == grid.len());
        assert!(out.best_error < out.feasibility_threshold);
        let xi = out.xi_at_t_min.unwrap();
        let mut check = p.clone();
        check.total_time = t_min;
        let err = super::super::grape::grape_error(&check, &xi).unwrap();
        assert!(err < out.feasibility_threshold, "replayed error {err}");
    }
}
