//! Exact operator size distribution of a Heisenberg-evolved Pauli.
//!
//! The evolved observable O(t) is expanded in the Pauli string basis; p_l is
//! the total squared weight carried by strings of support size l. The chaos
//! diagnostic follows by contraction against the tetrahedral second moment:
//! g(t) = sum_l p_l / 3^l.
//!
//! The Pauli expansion runs as a sequence of per-qubit 4x4 transforms on the
//! flattened operator, so the full spectrum of 4^n coefficients costs
//! O(n 4^{n+1}) instead of one trace per string.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::compiler::{ideal_step_unitary, QcaModel};
use crate::error::{Error, Result};
use crate::linalg::dagger;

use super::sample::{coloring_product_state, Coloring, Observable};
use super::tetra::TETRA_COUNT;

/// Dense Heisenberg evolution is capped at this many data qubits.
pub const MAX_SIZE_QUBITS: usize = 10;

/// Exhaustive ensemble averages are capped at this many data qubits.
pub const MAX_DIRECT_QUBITS: usize = 6;

/// Distribution of operator support sizes, p[l] for l = 0..=n.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SizeDistribution {
    pub p: Vec<f64>,
}

impl SizeDistribution {
    /// Number of data sites.
    pub fn n_sites(&self) -> usize {
        self.p.len() - 1
    }

    /// g = sum_{l >= 1} p_l / 3^l.
    pub fn g(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, &p)| p / 3f64.powi(l as i32))
            .sum()
    }
}

/// Dense matrix of a uniform Pauli observable on n qubits.
pub fn observable_dense(observable: &Observable, n: usize) -> Result<Array2<C64>> {
    observable.validate(n)?;
    let dim = 1usize << n;
    let support: usize = observable.sites.iter().map(|&s| 1usize << s).sum();
    let m = observable.sites.len();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for idx in 0..dim {
        match observable.axis {
            2 => {
                let ones = (idx & support).count_ones() as usize;
                let sign = if (m - ones) % 2 == 0 { 1.0 } else { -1.0 };
                out[[idx, idx]] = C64::new(sign, 0.0);
            }
            0 => {
                out[[idx ^ support, idx]] = C64::new(1.0, 0.0);
            }
            _ => {
                let k = (idx & support).count_ones() as usize;
                let phase = match (2 * k + 3 * m) % 4 {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                };
                out[[idx ^ support, idx]] = phase;
            }
        }
    }
    Ok(out)
}

/// Interleave the bits of `x` onto base-4 digit positions.
fn spread_bits(x: usize, n: usize) -> usize {
    let mut out = 0usize;
    for q in 0..n {
        out |= ((x >> q) & 1) << (2 * q);
    }
    out
}

/// Pauli coefficients c_P = tr(P O)/2^n of a dense operator, indexed by
/// base-4 digits per qubit (0 = identity, 1 = X, 2 = Y, 3 = Z).
pub fn pauli_spectrum(op: &Array2<C64>, n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    // Flatten O into a rank-n tensor over per-qubit (col, row) pairs.
    let mut tensor = vec![C64::new(0.0, 0.0); 1 << (2 * n)];
    let spread: Vec<usize> = (0..dim).map(|x| spread_bits(x, n)).collect();
    for row in 0..dim {
        for col in 0..dim {
            // Digit q encodes i_q + 2 k_q for the trace tr(P O) =
            // sum_{i,k} P[i,k] O[k,i].
            tensor[spread[col] + 2 * spread[row]] = op[[row, col]];
        }
    }
    // Per-qubit contraction with sigma^l[i, k] laid out over p = i + 2k.
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i_unit = C64::new(0.0, 1.0);
    let t4 = [
        [one, zero, zero, one],           // identity
        [zero, one, one, zero],           // X
        [zero, -i_unit, i_unit, zero],    // Y
        [-one, zero, zero, one],          // Z
    ];
    for q in 0..n {
        let stride = 1usize << (2 * q);
        let jump = stride * 4;
        let mut base = 0usize;
        while base < tensor.len() {
            for off in base..base + stride {
                let vals = [
                    tensor[off],
                    tensor[off + stride],
                    tensor[off + 2 * stride],
                    tensor[off + 3 * stride],
                ];
                for l in 0..4 {
                    let mut acc = zero;
                    for p in 0..4 {
                        acc += t4[l][p] * vals[p];
                    }
                    tensor[off + l * stride] = acc;
                }
            }
            base += jump;
        }
    }
    let norm = 1.0 / dim as f64;
    tensor.iter_mut().for_each(|c| *c *= norm);
    tensor
}

/// Size distributions of O(0), O(1), ..., O(t_max) under the ideal automaton,
/// sharing one incremental Heisenberg evolution.
pub fn exact_size_curve(
    model: &QcaModel,
    observable: &Observable,
    t_max: usize,
) -> Result<Vec<SizeDistribution>> {
    let step = ideal_step_unitary(model)?;
    let n = (step.nrows() as f64).log2().round() as usize;
    if n > MAX_SIZE_QUBITS {
        return Err(Error::Resource {
            what: "Heisenberg operator evolution".into(),
            required: n,
            cap: MAX_SIZE_QUBITS,
        });
    }
    let mut op = observable_dense(observable, n)?;
    let step_dag = dagger(&step);
    let mut curve = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            op = step_dag.dot(&op).dot(&step);
        }
        curve.push(bin_spectrum(&op, n)?);
    }
    Ok(curve)
}

/// Exact size distribution of O(t) under t steps of the ideal automaton.
pub fn exact_size_distribution(
    model: &QcaModel,
    observable: &Observable,
    t: usize,
) -> Result<SizeDistribution> {
    Ok(exact_size_curve(model, observable, t)?
        .pop()
        .expect("curve covers t"))
}

fn bin_spectrum(op: &Array2<C64>, n: usize) -> Result<SizeDistribution> {
    let spectrum = pauli_spectrum(op, n);
    let mut p = vec![0.0f64; n + 1];
    for (idx, c) in spectrum.iter().enumerate() {
        let mut digits = idx;
        let mut size = 0usize;
        for _ in 0..n {
            if digits & 3 != 0 {
                size += 1;
            }
            digits >>= 2;
        }
        p[size] += c.norm_sqr();
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::numeric(format!(
            "size distribution sums to {total}, expected 1"
        )));
    }
    Ok(SizeDistribution { p })
}

/// Exhaustive ensemble average of <psi|O(t)|psi>^2 over every coloring.
///
/// Independent oracle for the size-distribution contraction: it computes the
/// variance directly from the definition of the ensemble, without touching
/// the Pauli expansion.
pub fn exhaustive_g(model: &QcaModel, observable: &Observable, t: usize) -> Result<f64> {
    let circuit = crate::compiler::ideal_circuit(model)?;
    let n = circuit.n_qubits();
    if n > MAX_DIRECT_QUBITS {
        return Err(Error::Resource {
            what: "exhaustive ensemble average".into(),
            required: n,
            cap: MAX_DIRECT_QUBITS,
        });
    }
    observable.validate(n)?;
    let count = TETRA_COUNT.pow(n as u32);
    let mut acc = 0.0;
    for code in 0..count {
        let mut digits = code;
        let colors: Vec<u8> = (0..n)
            .map(|_| {
                let c = (digits % TETRA_COUNT) as u8 + 1;
                digits /= TETRA_COUNT;
                c
            })
            .collect();
        let coloring = Coloring::new(colors)?;
        let mut psi: Array1<C64> = coloring_product_state(&coloring)?;
        for _ in 0..t {
            circuit.apply_to(psi.as_slice_mut().expect("contiguous state"))?;
        }
        let e = observable.expectation(psi.as_slice().expect("contiguous state"));
        acc += e * e;
    }
    Ok(acc / count as f64)
}
