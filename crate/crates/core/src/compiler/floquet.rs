//! Leading-order effective Hamiltonian of the repeated step.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::C64;

use super::model::{chronological_layers, layer_hamiltonian, QcaModel};

/// Dense cap for effective-Hamiltonian construction; commutators of full
/// step generators are built as explicit matrices.
pub const MAX_EFFECTIVE_QUBITS: usize = 10;

/// First-order Magnus data for one step: with layer generators H_j applied
/// in order j = 1..n,
///
///   U = prod_j e^{-i tau H_j} = exp(-i tau (H_sum + tau C + O(tau^2))),
///
/// where H_sum is the layer sum and C the pairwise commutator correction
/// -(i/2) sum_{j>k} [H_j, H_k].
#[derive(Debug, Clone)]
pub struct FloquetEffective {
    /// Sum of all layer Hamiltonians; the tau -> 0 limit of the generator.
    pub h_sum: Array2<C64>,
    /// Coefficient of tau in the effective generator.
    pub correction: Array2<C64>,
    /// One addend of `correction` per later/earlier layer pair, in
    /// (j, k) lexicographic order with j > k.
    pub pairwise: Vec<Array2<C64>>,
}

/// Builds the effective generator of `model`'s step to first order in tau.
/// The result is tau-independent; the step generator is approximately
/// `h_sum + tau * correction`.
pub fn floquet_effective_h(model: &QcaModel) -> Result<FloquetEffective> {
    model.validate()?;
    let lattice = model.lattice.build()?;
    if lattice.n_sites() > MAX_EFFECTIVE_QUBITS {
        return Err(Error::Resource {
            what: "effective Hamiltonian".into(),
            required: lattice.n_sites(),
            cap: MAX_EFFECTIVE_QUBITS,
        });
    }

    let layers = chronological_layers(model, &lattice);
    let hs: Vec<Array2<C64>> = layers
        .iter()
        .map(|layer| layer_hamiltonian(layer, &lattice))
        .collect::<Result<_>>()?;

    let dim = hs[0].nrows();
    let mut h_sum: Array2<C64> = Array2::zeros((dim, dim));
    for h in &hs {
        h_sum += h;
    }

    let half_i = C64::new(0.0, 0.5);
    let mut pairwise = Vec::new();
    let mut correction: Array2<C64> = Array2::zeros((dim, dim));
    for j in 1..hs.len() {
        for k in 0..j {
            let comm = hs[j].dot(&hs[k]) - hs[k].dot(&hs[j]);
            let term = comm.mapv(|x| -half_i * x);
            correction += &term;
            pairwise.push(term);
        }
    }

    Ok(FloquetEffective {
        h_sum,
        correction,
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{ideal_step_unitary, QcaVariant};
    use crate::lattice::{Boundary, LatticeSpec};
    use crate::linalg::{kron, log_unitary, sigma_x, sigma_z, spectral_norm};
    use ndarray::Array2;

    fn ki(j: f64, h: f64, b: f64, n: usize, tau: f64) -> QcaModel {
        QcaModel::new(
            QcaVariant::KickedIsing { j, h, b },
            tau,
            LatticeSpec::chain(n, Boundary::Open),
        )
        .unwrap()
    }

    #[test]
    fn kickless_step_has_no_correction() {
        let eff = floquet_effective_h(&ki(0.8, 0.3, 0.0, 3, 0.5)).unwrap();
        assert!(spectral_norm(&eff.correction).unwrap() < 1e-13);
        assert_eq!(eff.pairwise.len(), 1);
    }

    #[test]
    fn two_site_correction_matches_a_hand_built_commutator() {
        let (j, h, b) = (0.9f64, 0.6, 0.7);
        let eff = floquet_effective_h(&ki(j, h, b, 2, 0.3)).unwrap();

        let eye: Array2<crate::linalg::C64> = Array2::eye(2);
        let z0 = kron(&eye, &sigma_z());
        let z1 = kron(&sigma_z(), &eye);
        let x0 = kron(&eye, &sigma_x());
        let x1 = kron(&sigma_x(), &eye);
        let h_int = z1.dot(&z0).mapv(|v| v * j) + (&z0 + &z1).mapv(|v| v * h);
        let h_kick = (&x0 + &x1).mapv(|v| v * b);
        assert!(spectral_norm(&(&eff.h_sum - &(&h_int + &h_kick))).unwrap() < 1e-13);

        // Kick follows interaction, so it sits in the later slot.
        let comm = h_kick.dot(&h_int) - h_int.dot(&h_kick);
        let expect = comm.mapv(|v| v * crate::linalg::C64::new(0.0, -0.5));
        assert!(spectral_norm(&(&eff.correction - &expect)).unwrap() < 1e-13);
    }

    #[test]
    fn residual_after_the_correction_shrinks_quadratically() {
        let residual = |tau: f64| -> f64 {
            let model = ki(0.9, 0.6, 0.7, 4, tau);
            let eff = floquet_effective_h(&model).unwrap();
            let u = ideal_step_unitary(&model).unwrap();
            let generator = log_unitary(&u).unwrap().mapv(|v| v / tau);
            let predicted = &eff.h_sum + &eff.correction.mapv(|v| v * tau);
            spectral_norm(&(&generator - &predicted)).unwrap()
        };
        let ratio = residual(0.04) / residual(0.02);
        assert!(
            (3.0..5.0).contains(&ratio),
            "second-order residual ratio {ratio}"
        );
    }

    #[test]
    fn three_layer_step_has_three_pairwise_terms() {
        let model = QcaModel::new(
            QcaVariant::KitaevFloquet {
                j_x: 0.5,
                j_y: 0.35,
                j_z: 0.6,
                h_x: 0.1,
                h_y: 0.2,
                h_z: 0.15,
            },
            0.4,
            LatticeSpec::hexagon(),
        )
        .unwrap();
        let eff = floquet_effective_h(&model).unwrap();
        assert_eq!(eff.pairwise.len(), 3);

        let mut sum: Array2<crate::linalg::C64> = Array2::zeros(eff.correction.dim());
        for term in &eff.pairwise {
            sum += term;
        }
        assert!(spectral_norm(&(&sum - &eff.correction)).unwrap() < 1e-13);

        // Hermitian and traceless, as a sum of i * commutators must be.
        let dag = crate::linalg::dagger(&eff.correction);
        assert!(spectral_norm(&(&dag - &eff.correction)).unwrap() < 1e-12);
        let trace: crate::linalg::C64 = (0..eff.correction.nrows())
            .map(|i| eff.correction[[i, i]])
            .sum();
        assert!(trace.norm() < 1e-12);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let err = floquet_effective_h(&ki(0.5, 0.2, 0.1, MAX_EFFECTIVE_QUBITS + 1, 0.3));
        assert!(matches!(err, Err(crate::error::Error::Resource { .. })));
    }
}
