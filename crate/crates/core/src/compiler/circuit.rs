//! Data-qubit gate circuits: one step of an update rule as ordered layers
//! of disjoint gates.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{apply_single, apply_two_diag, C64};

use super::model::{check_dense_cap, QcaModel};
use super::plan::{step_plan, SubStep};

/// A gate inside one circuit layer.
///
/// The two-qubit gate is the doubly-ground controlled phase: it multiplies
/// the |gg> branch of the pair by exp(i phi) and leaves the other three
/// branches alone. This is exactly what a mediated-gate pulse imprints; the
/// conventional controlled-phase form differs only by single-qubit z
/// rotations, which the circuit carries explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    SingleQubit { qubit: usize, matrix: [[C64; 2]; 2] },
    CzPhi { phi: f64, pair: (usize, usize) },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::SingleQubit { qubit, .. } => vec![*qubit],
            Gate::CzPhi { pair, .. } => vec![pair.0, pair.1],
        }
    }
}

/// Ordered layers of disjoint gates on a data register.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateCircuit {
    n_qubits: usize,
    layers: Vec<Vec<Gate>>,
}

impl GateCircuit {
    /// Builds a circuit, checking qubit ranges and in-layer disjointness.
    pub fn new(n_qubits: usize, layers: Vec<Vec<Gate>>) -> Result<Self> {
        for (index, layer) in layers.iter().enumerate() {
            let mut used = vec![false; n_qubits];
            for gate in layer {
                for q in gate.qubits() {
                    if q >= n_qubits {
                        return Err(Error::config(format!(
                            "layer {index} touches qubit {q}, register has {n_qubits}"
                        )));
                    }
                    if used[q] {
                        return Err(Error::config(format!(
                            "layer {index} has overlapping gates on qubit {q}"
                        )));
                    }
                    used[q] = true;
                }
                if let Gate::CzPhi { pair, .. } = gate {
                    if pair.0 == pair.1 {
                        return Err(Error::config("two-qubit gate on a single qubit"));
                    }
                }
            }
        }
        Ok(GateCircuit { n_qubits, layers })
    }

    /// As [`GateCircuit::new`], additionally requiring every two-qubit gate
    /// to sit on a lattice bond.
    pub fn new_on_lattice(
        n_qubits: usize,
        layers: Vec<Vec<Gate>>,
        lattice: &Lattice,
    ) -> Result<Self> {
        for layer in &layers {
            for gate in layer {
                if let Gate::CzPhi { pair, .. } = gate {
                    let (a, b) = (pair.0.min(pair.1), pair.0.max(pair.1));
                    let adjacent = lattice.bonds.iter().any(|bond| bond.a == a && bond.b == b);
                    if !adjacent {
                        return Err(Error::config(format!(
                            "two-qubit gate on non-adjacent pair ({a}, {b})"
                        )));
                    }
                }
            }
        }
        GateCircuit::new(n_qubits, layers)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    /// Number of layers containing at least one two-qubit gate; the light
    /// cone of one step grows by at most this graph distance.
    pub fn entangling_layer_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|layer| layer.iter().any(|g| matches!(g, Gate::CzPhi { .. })))
            .count()
    }

    /// Applies the circuit in place to a dense state; qubit 0 is the least
    /// significant bit of the index.
    pub fn apply_to(&self, psi: &mut [C64]) -> Result<()> {
        if psi.len() != 1usize << self.n_qubits {
            return Err(Error::config(format!(
                "state has {} amplitudes, circuit acts on {} qubits",
                psi.len(),
                self.n_qubits
            )));
        }
        for layer in &self.layers {
            for gate in layer {
                match gate {
                    Gate::SingleQubit { qubit, matrix } => apply_single(matrix, *qubit, psi),
                    Gate::CzPhi { phi, pair } => {
                        let branch = C64::from_polar(1.0, *phi);
                        let one = C64::new(1.0, 0.0);
                        // diag entry 0 is both qubits in |g>.
                        let diag = [branch, one, one, one];
                        let (lo, hi) = (pair.0.min(pair.1), pair.0.max(pair.1));
                        apply_two_diag(&diag, lo, hi, psi);
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense unitary of the whole circuit, built column by column.
    pub fn unitary(&self) -> Result<Array2<C64>> {
        check_dense_cap(self.n_qubits, "dense circuit unitary")?;
        let dim = 1usize << self.n_qubits;
        let mut u = Array2::<C64>::zeros((dim, dim));
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for k in 0..dim {
            col.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            col[k] = C64::new(1.0, 0.0);
            self.apply_to(&mut col)?;
            for (i, v) in col.iter().enumerate() {
                u[[i, k]] = *v;
            }
        }
        Ok(u)
    }
}

/// Greedy partition of bonds into rounds with pairwise disjoint endpoints.
pub(crate) fn disjoint_rounds(pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut rounds: Vec<(Vec<usize>, std::collections::BTreeSet<usize>)> = Vec::new();
    for (index, &(a, b)) in pairs.iter().enumerate() {
        let slot = rounds
            .iter_mut()
            .find(|(_, used)| !used.contains(&a) && !used.contains(&b));
        match slot {
            Some((members, used)) => {
                members.push(index);
                used.insert(a);
                used.insert(b);
            }
            None => {
                let mut used = std::collections::BTreeSet::new();
                used.insert(a);
                used.insert(b);
                rounds.push((vec![index], used));
            }
        }
    }
    rounds.into_iter().map(|(members, _)| members).collect()
}

fn singles_layer(unitaries: &[Array2<C64>]) -> Vec<Gate> {
    unitaries
        .iter()
        .enumerate()
        .map(|(qubit, u)| Gate::SingleQubit {
            qubit,
            matrix: [[u[[0, 0]], u[[0, 1]]], [u[[1, 0]], u[[1, 1]]]],
        })
        .collect()
}

fn is_identity_layer(unitaries: &[Array2<C64>]) -> bool {
    unitaries.iter().all(|u| {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((u[[i, j]] - C64::new(expect, 0.0)).norm());
            }
        }
        worst < 1e-12
    })
}

/// The ideal one-step circuit of a model: the same sub-step schedule the
/// pulse compiler uses, rendered as gates on the data register.
pub fn ideal_circuit(model: &QcaModel) -> Result<GateCircuit> {
    model.validate()?;
    let lattice = model.lattice.build()?;
    let plan = step_plan(model, &lattice, false)?;
    let mut layers: Vec<Vec<Gate>> = Vec::new();
    for SubStep {
        pre,
        bond_phases,
        post,
    } in plan
    {
        if let Some(unitaries) = pre {
            if !is_identity_layer(&unitaries) {
                layers.push(singles_layer(&unitaries));
            }
        }
        push_cz_rounds(&mut layers, &lattice, &bond_phases);
        if let Some(unitaries) = post {
            if !is_identity_layer(&unitaries) {
                layers.push(singles_layer(&unitaries));
            }
        }
    }
    GateCircuit::new_on_lattice(lattice.n_sites(), layers, &lattice)
}

fn push_cz_rounds(
    layers: &mut Vec<Vec<Gate>>,
    lattice: &Lattice,
    bond_phases: &BTreeMap<usize, f64>,
) {
    let active: Vec<(usize, f64)> = bond_phases
        .iter()
        .map(|(&bond, &phi)| (bond, phi))
        .filter(|&(_, phi)| phi.rem_euclid(2.0 * std::f64::consts::PI).min(
            (2.0 * std::f64::consts::PI) - phi.rem_euclid(2.0 * std::f64::consts::PI),
        ) > 1e-9)
        .collect();
    if active.is_empty() {
        return;
    }
    let pairs: Vec<(usize, usize)> = active
        .iter()
        .map(|&(bond, _)| (lattice.bonds[bond].a, lattice.bonds[bond].b))
        .collect();
    for round in disjoint_rounds(&pairs) {
        layers.push(
            round
                .into_iter()
                .map(|i| Gate::CzPhi {
                    phi: active[i].1,
                    pair: pairs[i],
                })
                .collect(),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, LatticeSpec};
    use super::super::model::ideal_step_unitary;
    use super::super::QcaVariant;

    fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        (a - b).mapv(|v| v.norm()).fold(0.0, |acc, &v| acc.max(v))
    }

    /// Compares two unitaries modulo global phase by aligning at the
    /// largest entry.
    fn phase_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        let mut best = (0usize, 0usize);
        let mut mag = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[[i, j]].norm() > mag {
                    mag = a[[i, j]].norm();
                    best = (i, j);
                }
            }
        }
        let lambda = b[[best.0, best.1]] / a[[best.0, best.1]];
        let aligned = a.mapv(|v| v * lambda);
        max_abs_diff(&aligned, b)
    }

    fn circuit_matches_step(model: &QcaModel) {
        let circuit = ideal_circuit(model).unwrap();
        let from_gates = circuit.unitary().unwrap();
        let direct = ideal_step_unitary(model).unwrap();
        let d = phase_distance(&from_gates, &direct);
        assert!(
            d < 1e-10,
            "{}: circuit deviates from the step unitary by {d}",
            model.variant.name()
        );
    }

    #[test]
    fn kicked_ising_circuit_matches_step_unitary() {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.9,
                h: 0.45,
                b: 0.6,
            },
            0.8,
            LatticeSpec::chain(3, Boundary::Open),
        )
        .unwrap();
        circuit_matches_step(&model);
    }

    #[test]
    fn periodic_chain_circuit_matches_step_unitary() {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 1.1,
                h: 0.25,
                b: 0.4,
            },
            0.6,
            LatticeSpec::chain(5, Boundary::Periodic),
        )
        .unwrap();
        circuit_matches_step(&model);
    }

    #[test]
    fn inhomogeneous_square_circuit_matches_step_unitary() {
        let model = QcaModel::new(
            QcaVariant::InhomKickedIsing {
                j_x: 0.7,
                j_y: 0.3,
                h: 0.2,
                b: 0.5,
            },
            0.9,
            LatticeSpec::square(2, 2, Boundary::Open),
        )
        .unwrap();
        circuit_matches_step(&model);
    }

    #[test]
    fn kitaev_hexagon_circuit_matches_step_unitary() {
        let model = QcaModel::new(
            QcaVariant::KitaevFloquet {
                j_x: 0.55,
                j_y: 0.35,
                j_z: 0.75,
                h_x: 0.15,
                h_y: 0.05,
                h_z: 0.25,
            },
            0.7,
            LatticeSpec::hexagon(),
        )
        .unwrap();
        circuit_matches_step(&model);
    }

    #[test]
    fn two_local_chain_circuit_matches_step_unitary() {
        let model = QcaModel::new(
            QcaVariant::TwoLocal {
                c_x: 0.4,
                c_y: 0.25,
                c_z: 0.65,
                h_x: 0.1,
                h_y: 0.3,
                h_z: 0.05,
            },
            0.5,
            LatticeSpec::chain(4, Boundary::Open),
        )
        .unwrap();
        circuit_matches_step(&model);
    }

    #[test]
    fn overlapping_gates_in_a_layer_are_rejected() {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let matrix = [[h, h], [h, -h]];
        let layer = vec![
            Gate::SingleQubit { qubit: 1, matrix },
            Gate::CzPhi {
                phi: 0.3,
                pair: (0, 1),
            },
        ];
        assert!(matches!(
            GateCircuit::new(3, vec![layer]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_adjacent_two_qubit_gates_are_rejected() {
        let lattice = LatticeSpec::chain(4, Boundary::Open).build().unwrap();
        let layer = vec![Gate::CzPhi {
            phi: 0.3,
            pair: (0, 2),
        }];
        assert!(matches!(
            GateCircuit::new_on_lattice(4, vec![layer], &lattice),
            Err(Error::Config(_))
        ));
        let ok = vec![Gate::CzPhi {
            phi: 0.3,
            pair: (2, 3),
        }];
        assert!(GateCircuit::new_on_lattice(4, vec![ok], &lattice).is_ok());
    }

    #[test]
    fn rounds_partition_bonds_into_disjoint_sets() {
        // A 5-chain needs two rounds; every bond appears exactly once.
        let pairs: Vec<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
        let rounds = disjoint_rounds(&pairs);
        assert_eq!(rounds.len(), 2);
        let mut seen: Vec<usize> = rounds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        for round in &rounds {
            let mut used = std::collections::BTreeSet::new();
            for &i in round {
                assert!(used.insert(pairs[i].0));
                assert!(used.insert(pairs[i].1));
            }
        }
    }

    #[test]
    fn circuit_application_matches_its_unitary() {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.8,
                h: 0.1,
                b: 0.9,
            },
            1.0,
            LatticeSpec::chain(4, Boundary::Periodic),
        )
        .unwrap();
        let circuit = ideal_circuit(&model).unwrap();
        let u = circuit.unitary().unwrap();
        let dim = 1usize << 4;
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        // a spread-out but deterministic test vector
        for (k, v) in psi.iter_mut().enumerate() {
            let x = 0.37 * (k as f64 + 1.0);
            *v = C64::new(x.cos(), x.sin()) / C64::new((dim as f64).sqrt(), 0.0);
        }
        let by_matrix: Vec<C64> = (0..dim)
            .map(|i| (0..dim).map(|k| u[[i, k]] * psi[k]).sum())
            .collect();
        circuit.apply_to(&mut psi).unwrap();
        let diff: f64 = psi
            .iter()
            .zip(by_matrix.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-12, "apply/unitary mismatch {diff}");
    }
}
