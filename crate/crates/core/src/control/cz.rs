//! Closed-form mediated-phase pulses for a single gadget size.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Species;
use crate::pxp::{PhaseSchedule, PulseSegment};

/// Target phases this close to 0 or 2 pi are clamped inward; the pulse
/// duration vanishes at the interval ends.
pub const PHASE_CLAMP: f64 = 1e-6;

/// A linear-ramp drive that walks the collective ground state of a gadget
/// around a closed two-level loop, imprinting a geometric phase on the
/// branch where the gadget is unblocked.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzPulseParams {
    /// Phase imprinted on the doubly-ground data branch, in (0, 2 pi).
    pub target_phase: f64,
    /// Gadget cardinality S.
    pub size: usize,
    /// Per-atom Rabi frequency.
    pub rabi: f64,
    /// Slope of the linear phase ramp.
    pub ramp_slope: f64,
    /// Total drive duration.
    pub duration: f64,
}

/// Solves the closed-loop condition for a target phase: with effective
/// coupling a = sqrt(S) Omega,
///   duration = (2 / a) sqrt(pi^2 - (pi - phi)^2),
///   slope    = 2 (pi - phi) / duration,
/// which together satisfy duration = 2 pi / sqrt(slope^2 + a^2).
pub fn cz_pulse_params(phi: f64, size: usize, rabi: f64) -> Result<CzPulseParams> {
    if size == 0 {
        return Err(Error::config("gadget size must be at least 1"));
    }
    if !(rabi > 0.0) {
        return Err(Error::config(format!(
            "rabi frequency must be positive, got {rabi}"
        )));
    }
    if !phi.is_finite() || phi <= 0.0 || phi >= 2.0 * PI {
        return Err(Error::domain(format!(
            "target phase must lie strictly inside (0, 2 pi), got {phi}"
        )));
    }
    let phi = phi.clamp(PHASE_CLAMP, 2.0 * PI - PHASE_CLAMP);
    let eff = (size as f64).sqrt() * rabi;
    let duration = (2.0 / eff) * (PI * PI - (PI - phi) * (PI - phi)).sqrt();
    let ramp_slope = 2.0 * (PI - phi) / duration;
    Ok(CzPulseParams {
        target_phase: phi,
        size,
        rabi,
        ramp_slope,
        duration,
    })
}

impl CzPulseParams {
    /// The ancilla-species drive segment realizing this pulse. The ramp runs
    /// upward with `ramp_slope`; with the raising convention of the engine
    /// (matrix element (Omega/2) e^{+i xi} on |g> -> |r>) that choice puts
    /// `target_phase` rather than its complement on the unblocked branch.
    pub fn segment(&self, frozen: Vec<usize>) -> PulseSegment {
        PulseSegment {
            species: Species::Ancilla,
            rabi: self.rabi,
            phase: PhaseSchedule::Linear {
                slope: self.ramp_slope,
                offset: 0.0,
            },
            duration: self.duration,
            detuning: 0.0,
            frozen,
        }
    }
}
