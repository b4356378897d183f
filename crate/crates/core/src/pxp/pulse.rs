//! Pulse-program data model: drive segments, exact single-atom gates, and
//! whole programs, with validation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Species;
use crate::linalg::C64;

/// Tolerance on `len(values) * dt == duration` for piecewise phase ramps.
pub const DT_CONSISTENCY_TOL: f64 = 1e-12;

/// Laser phase as a function of time within one segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSchedule {
    /// Constant phase for the whole segment.
    Constant { value: f64 },
    /// ξ(t) = offset + slope · t for t in [0, duration].
    Linear { slope: f64, #[serde(default)] offset: f64 },
    /// Stepwise-constant phases, each held for `dt`.
    PiecewiseConstant { values: Vec<f64>, dt: f64 },
}

/// One globally-driven pulse on a single species.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSegment {
    pub species: Species,
    /// Rabi frequency Ω > 0 of the bare (single-atom) drive.
    pub rabi: f64,
    pub phase: PhaseSchedule,
    pub duration: f64,
    /// Uniform detuning applied to every driven, unfrozen atom.
    #[serde(default)]
    pub detuning: f64,
    /// Atoms excluded from the drive. They keep blockading neighbors.
    #[serde(default)]
    pub frozen: Vec<usize>,
}

impl PulseSegment {
    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        if !(self.rabi > 0.0) {
            return Err(Error::config(format!(
                "pulse rabi frequency must be positive, got {}",
                self.rabi
            )));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::config(format!(
                "pulse duration must be finite and non-negative, got {}",
                self.duration
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::config("pulse detuning must be finite"));
        }
        match &self.phase {
            PhaseSchedule::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config("constant phase must be finite"));
                }
            }
            PhaseSchedule::Linear { slope, offset } => {
                if !slope.is_finite() || !offset.is_finite() {
                    return Err(Error::config("linear phase parameters must be finite"));
                }
            }
            PhaseSchedule::PiecewiseConstant { values, dt } => {
                if values.is_empty() {
                    return Err(Error::config(
                        "piecewise phase schedule needs at least one value",
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("piecewise phases must be finite"));
                }
                if !(*dt > 0.0) {
                    return Err(Error::config(format!(
                        "piecewise phase dt must be positive, got {dt}"
                    )));
                }
                let total = values.len() as f64 * dt;
                if (total - self.duration).abs() > DT_CONSISTENCY_TOL {
                    return Err(Error::config(format!(
                        "piecewise schedule covers {total} but segment duration is {}",
                        self.duration
                    )));
                }
            }
        }
        for &a in &self.frozen {
            if a >= n_atoms {
                return Err(Error::config(format!(
                    "frozen atom id {a} out of range for {n_atoms} atoms"
                )));
            }
        }
        Ok(())
    }
}

/// Exact single-atom SU(2) gates, applied simultaneously on distinct atoms.
///
/// This is the idealized stand-in for a resonant single-species pulse: each
/// listed atom gets its own 2x2 unitary in the (g, r) basis; every other
/// atom of any species is untouched. Blockade still projects: matrix
/// elements that would create a forbidden configuration are dropped, and
/// the excited level of a blockaded atom acts as a spectator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSingles {
    pub ops: Vec<(usize, Array2<C64>)>,
}

impl ExactSingles {
    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (atom, op) in &self.ops {
            if *atom >= n_atoms {
                return Err(Error::config(format!(
                    "single-atom gate targets atom {atom}, array has {n_atoms}"
                )));
            }
            if !seen.insert(*atom) {
                return Err(Error::config(format!(
                    "single-atom gate lists atom {atom} twice"
                )));
            }
            if op.dim() != (2, 2) {
                return Err(Error::config("single-atom gates must be 2x2"));
            }
            // U^dag U = I within 1e-8; anything looser corrupts norms.
            let mut worst: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let dot: C64 = (0..2).map(|k| op[[k, i]].conj() * op[[k, j]]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - C64::new(expect, 0.0)).norm());
                }
            }
            if worst > 1e-8 {
                return Err(Error::config(format!(
                    "single-atom gate on atom {atom} is not unitary (deviation {worst:.2e})"
                )));
            }
        }
        Ok(())
    }
}

/// One entry of a pulse program.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Drive(PulseSegment),
    Singles(ExactSingles),
}

/// A complete globally-driven program.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PulseProgram {
    pub segments: Vec<Segment>,
}

impl PulseProgram {
    pub fn new(segments: Vec<Segment>) -> Self {
        PulseProgram { segments }
    }

    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        for seg in &self.segments {
            match seg {
                Segment::Drive(p) => p.validate(n_atoms)?,
                Segment::Singles(s) => s.validate(n_atoms)?,
            }
        }
        Ok(())
    }

    /// Total wall-clock duration of the drive segments.
    pub fn total_duration(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Drive(p) => p.duration,
                Segment::Singles(_) => 0.0,
            })
            .sum()
    }

    pub fn push_drive(&mut self, seg: PulseSegment) {
        self.segments.push(Segment::Drive(seg));
    }

    pub fn push_singles(&mut self, ops: Vec<(usize, Array2<C64>)>) {
        self.segments.push(Segment::Singles(ExactSingles { ops }));
    }
}
