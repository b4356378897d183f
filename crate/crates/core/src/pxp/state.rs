//! State vectors over the blockade-constrained basis.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::pxp::basis::ConstrainedBasis;

/// Largest data register that `from_data_state` / `project_data_sector`
/// will materialize as a dense 2^n vector.
pub const MAX_DATA_QUBITS_DENSE: usize = 24;

/// A normalized wavefunction over a [`ConstrainedBasis`].
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<ConstrainedBasis>,
    amps: Array1<C64>,
}

impl StateVector {
    /// All atoms in |g>.
    pub fn ground(basis: Arc<ConstrainedBasis>) -> Self {
        let mut amps = Array1::zeros(basis.dim());
        amps[basis.ground_index()] = Complex64::new(1.0, 0.0);
        StateVector { basis, amps }
    }

    /// A single allowed configuration.
    pub fn from_config(basis: Arc<ConstrainedBasis>, config: u64) -> Result<Self> {
        let idx = basis
            .index_of(config)
            .ok_or_else(|| Error::domain(format!("configuration {config:#b} is blockade-forbidden")))?;
        let mut amps = Array1::zeros(basis.dim());
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(StateVector { basis, amps })
    }

    /// Embed a dense data-register state with every ancilla in |g>.
    ///
    /// `data_amps[k]` is the amplitude of the data configuration whose bit i
    /// is the state of data atom i. Data atoms never blockade each other, so
    /// every such configuration is allowed.
    pub fn from_data_state(basis: Arc<ConstrainedBasis>, data_amps: &[C64]) -> Result<Self> {
        let n = basis.n_data();
        if n > MAX_DATA_QUBITS_DENSE {
            return Err(Error::Resource {
                what: "dense data register".into(),
                required: n,
                cap: MAX_DATA_QUBITS_DENSE,
            });
        }
        if data_amps.len() != 1 << n {
            return Err(Error::config(format!(
                "data state has {} amplitudes, expected {}",
                data_amps.len(),
                1usize << n
            )));
        }
        let mut amps = Array1::zeros(basis.dim());
        for (k, &a) in data_amps.iter().enumerate() {
            let idx = basis
                .index_of(k as u64)
                .expect("pure data configurations are always allowed");
            amps[idx] = a;
        }
        Ok(StateVector { basis, amps })
    }

    pub fn from_amplitudes(basis: Arc<ConstrainedBasis>, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::config(format!(
                "amplitude vector length {} does not match basis dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        Ok(StateVector { basis, amps })
    }

    pub fn basis(&self) -> &Arc<ConstrainedBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut Array1<C64> {
        &mut self.amps
    }

    pub fn into_amps(self) -> Array1<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.mapv_inplace(|a| a / n);
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Amplitudes of the all-ancilla-|g> sector as a dense 2^n_data vector.
    /// The projection is not renormalized.
    pub fn project_data_sector(&self) -> Result<Array1<C64>> {
        let n = self.basis.n_data();
        if n > MAX_DATA_QUBITS_DENSE {
            return Err(Error::Resource {
                what: "dense data register".into(),
                required: n,
                cap: MAX_DATA_QUBITS_DENSE,
            });
        }
        let mut out = Array1::zeros(1 << n);
        let anc = self.basis.ancilla_mask();
        for (idx, &c) in self.basis.configs().iter().enumerate() {
            if c & anc == 0 {
                out[c as usize] = self.amps[idx];
            }
        }
        Ok(out)
    }

    /// Probability of finding every ancilla in |g>.
    pub fn ancilla_ground_probability(&self) -> f64 {
        let anc = self.basis.ancilla_mask();
        self.basis
            .configs()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c & anc == 0)
            .map(|(idx, _)| self.amps[idx].norm_sqr())
            .sum()
    }

    /// Serializable snapshot: one entry per basis configuration.
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            entries: self
                .basis
                .configs()
                .iter()
                .enumerate()
                .map(|(idx, &c)| SnapshotEntry {
                    config: self.basis.bitstring(c),
                    re: self.amps[idx].re,
                    im: self.amps[idx].im,
                })
                .collect(),
        }
    }
}

/// Leakage diagnostic: 1 minus the probability that all ancillas are in |g>.
pub fn ancilla_return_check(state: &StateVector) -> f64 {
    1.0 - state.ancilla_ground_probability()
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSnapshot {
    pub entries: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub config: String,
    pub re: f64,
    pub im: f64,
}
