//! Pulse-level control synthesis.
//!
//! Everything here works at the level of collective two-level sectors: a
//! gadget of S ancillas behaves as a single superatom with coupling
//! sqrt(S) Omega, so pulse design reduces to a handful of 2x2 problems.
//! [`cz_pulse_params`] solves the single-size phase gate in closed form;
//! the GRAPE routines shape one shared profile that addresses several
//! sizes at once; [`controllability_check`] certifies when that is possible;
//! [`time_optimal_scan`] locates the minimum feasible duration.

mod cz;
mod grape;
mod lie;
mod scan;

pub use cz::{cz_pulse_params, CzPulseParams, PHASE_CLAMP};
pub use grape::{
    grape_error, grape_gradient, grape_optimize, GrapeProblem, GrapeResult, DEFAULT_STEPS,
    DEFAULT_THRESHOLD,
};
pub use lie::{controllability_check, ControllabilityCertificate};
pub use scan::{time_optimal_scan, ScanConfig, ScanOutcome, ScanPoint, FEASIBILITY_SLACK};
