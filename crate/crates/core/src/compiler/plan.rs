//! The shared sub-step schedule behind both circuit and pulse rendering.
//!
//! Every variant's step factors into sub-steps of the form
//! `post * (mediated phases on bonds) * pre`, with `pre` and `post`
//! single-qubit layers. Rendering the same schedule twice, once as gates
//! and once as pulses, is what makes the two outputs agree by construction.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::Result;
use crate::lattice::{BondClass, GadgetAssignment, Lattice};
use crate::linalg::{expm_i_hermitian, sigma_x, sigma_y, C64};

use super::model::{PauliAxis, QcaModel, QcaVariant};

/// One sub-step: optional single-qubit layers around one mediated round.
///
/// `bond_phases` maps bond index to the raw branch phase imprinted on the
/// doubly-ground branch of that bond; `pre`/`post` hold one 2x2 unitary per
/// site, `pre` applied before the mediated round.
pub(crate) struct SubStep {
    pub pre: Option<Vec<Array2<C64>>>,
    pub bond_phases: BTreeMap<usize, f64>,
    pub post: Option<Vec<Array2<C64>>>,
}

/// Basis-change rotation with `R^dag sigma_z R = sigma_axis`.
pub(crate) fn basis_rotation(axis: PauliAxis) -> Array2<C64> {
    match axis {
        0 => expm_i_hermitian(&sigma_y(), -std::f64::consts::FRAC_PI_4)
            .expect("2x2 exponential"),
        1 => expm_i_hermitian(&sigma_x(), std::f64::consts::FRAC_PI_4)
            .expect("2x2 exponential"),
        _ => Array2::eye(2),
    }
}

/// diag(exp(i alpha), exp(-i alpha)) = exp(-i alpha sigma_z).
fn z_rotation(alpha: f64) -> Array2<C64> {
    let mut m = Array2::zeros((2, 2));
    m[[0, 0]] = C64::from_polar(1.0, alpha);
    m[[1, 1]] = C64::from_polar(1.0, -alpha);
    m
}

/// exp(-i theta sigma_x).
fn x_rotation(theta: f64) -> Array2<C64> {
    expm_i_hermitian(&sigma_x(), theta).expect("2x2 exponential")
}

/// The decoration sizes each variant requires.
pub(crate) fn gadget_assignment(model: &QcaModel) -> GadgetAssignment {
    match model.variant {
        QcaVariant::KickedIsing { .. } | QcaVariant::TwoLocal { .. } => {
            GadgetAssignment::uniform(1)
        }
        QcaVariant::InhomKickedIsing { .. } => {
            GadgetAssignment::per_class(&[(BondClass::X, 1), (BondClass::Y, 2)])
        }
        QcaVariant::KitaevFloquet { .. } => GadgetAssignment::per_class(&[
            (BondClass::Z, 1),
            (BondClass::Y, 2),
            (BondClass::X, 3),
        ]),
    }
}

/// Per-site z-correction weights for one interaction round: the sum of the
/// couplings of the active bonds at each site. With `uniform_degree` every
/// site instead uses the bulk (maximum) bond count of each class, which
/// reproduces the global-pulse bookkeeping of a regular graph.
fn site_weights(
    lattice: &Lattice,
    active: &[(usize, f64)],
    uniform_degree: bool,
) -> Vec<f64> {
    let n = lattice.n_sites();
    if !uniform_degree {
        let mut weight = vec![0.0; n];
        for &(bond, coupling) in active {
            let b = &lattice.bonds[bond];
            weight[b.a] += coupling;
            weight[b.b] += coupling;
        }
        return weight;
    }
    let mut per_class: BTreeMap<BondClass, f64> = BTreeMap::new();
    for &(bond, coupling) in active {
        per_class.insert(lattice.bonds[bond].class, coupling);
    }
    let mut uniform = 0.0;
    for (&class, &coupling) in &per_class {
        let g = (0..n)
            .map(|site| lattice.degree_of_class(site, class))
            .max()
            .unwrap_or(0);
        uniform += g as f64 * coupling;
    }
    vec![uniform; n]
}

/// One interaction sub-step along `axis`: the mediated branch phase is
/// -4 tau J per active bond and the z-correction angle at site i is
/// tau * (field + sum of couplings at i).
fn interaction_substep(
    lattice: &Lattice,
    tau: f64,
    axis: PauliAxis,
    active: Vec<(usize, f64)>,
    field: f64,
    uniform_degree: bool,
) -> SubStep {
    let rotation = basis_rotation(axis);
    let weights = site_weights(lattice, &active, uniform_degree);
    // In the rotated frame the field and the per-bond branch dressings are
    // all z rotations; z_rotation(tau (field + w_i)) = e^{-i tau (field +
    // w_i) sigma_z} collects them into one gate per site.
    let pre: Vec<Array2<C64>> = weights
        .iter()
        .map(|w| z_rotation(tau * (field + w)).dot(&rotation))
        .collect();
    let post: Vec<Array2<C64>> = (0..lattice.n_sites())
        .map(|_| crate::linalg::dagger(&rotation))
        .collect();
    let bond_phases = active
        .into_iter()
        .map(|(bond, coupling)| (bond, -4.0 * tau * coupling))
        .collect();
    SubStep {
        pre: Some(pre),
        bond_phases,
        post: Some(post),
    }
}

/// The chronological sub-step schedule of one step.
pub(crate) fn step_plan(
    model: &QcaModel,
    lattice: &Lattice,
    uniform_degree: bool,
) -> Result<Vec<SubStep>> {
    model.validate()?;
    let tau = model.tau;
    let all_bonds = |c: f64| -> Vec<(usize, f64)> {
        (0..lattice.bonds.len()).map(|i| (i, c)).collect()
    };
    let class_bonds = |class: BondClass, c: f64| -> Vec<(usize, f64)> {
        lattice
            .bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class == class)
            .map(|(i, _)| (i, c))
            .collect()
    };

    let plan = match model.variant {
        QcaVariant::KickedIsing { j, h, b } => {
            vec![synchronous_substep(lattice, tau, all_bonds(j), h, b, uniform_degree)]
        }
        QcaVariant::InhomKickedIsing { j_x, j_y, h, b } => {
            let mut active = class_bonds(BondClass::X, j_x);
            active.extend(class_bonds(BondClass::Y, j_y));
            active.sort_unstable_by_key(|&(i, _)| i);
            vec![synchronous_substep(lattice, tau, active, h, b, uniform_degree)]
        }
        QcaVariant::KitaevFloquet {
            j_x,
            j_y,
            j_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            interaction_substep(lattice, tau, 2, class_bonds(BondClass::Z, j_z), h_z, uniform_degree),
            interaction_substep(lattice, tau, 1, class_bonds(BondClass::Y, j_y), h_y, uniform_degree),
            interaction_substep(lattice, tau, 0, class_bonds(BondClass::X, j_x), h_x, uniform_degree),
        ],
        QcaVariant::TwoLocal {
            c_x,
            c_y,
            c_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            interaction_substep(lattice, tau, 0, all_bonds(c_x), h_x, uniform_degree),
            interaction_substep(lattice, tau, 1, all_bonds(c_y), h_y, uniform_degree),
            interaction_substep(lattice, tau, 2, all_bonds(c_z), h_z, uniform_degree),
        ],
    };
    Ok(plan)
}

/// Kicked-Ising style sub-step: the z-basis interaction round first, then a
/// single data layer combining the z-corrections with the transverse kick.
fn synchronous_substep(
    lattice: &Lattice,
    tau: f64,
    active: Vec<(usize, f64)>,
    field: f64,
    kick: f64,
    uniform_degree: bool,
) -> SubStep {
    let weights = site_weights(lattice, &active, uniform_degree);
    let kick_matrix = x_rotation(tau * kick);
    let post: Vec<Array2<C64>> = weights
        .iter()
        .map(|w| kick_matrix.dot(&z_rotation(tau * (field + w))))
        .collect();
    let bond_phases = active
        .into_iter()
        .map(|(bond, coupling)| (bond, -4.0 * tau * coupling))
        .collect();
    SubStep {
        pre: None,
        bond_phases,
        post: Some(post),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, kron, sigma, sigma_z};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(a: &Array2<C64>) -> f64 {
        a.mapv(|v| v.norm()).fold(0.0, |acc, &v| acc.max(v))
    }

    #[test]
    fn basis_rotations_transport_z_to_each_axis() {
        for axis in 0..3 {
            let r = basis_rotation(axis);
            let moved = dagger(&r).dot(&sigma_z()).dot(&r);
            let diff = max_abs(&(&moved - &sigma(axis)));
            assert!(diff < 1e-14, "axis {axis}: conjugation off by {diff}");
        }
    }

    /// The doubly-ground branch phase identity behind every mediated gate:
    /// diag(e^{i phi},1,1,1) equals e^{i phi/4} times
    /// [e^{-i phi sigma_z/4} (x) e^{-i phi sigma_z/4}] e^{i phi zz/4}.
    #[test]
    fn branch_phase_factors_into_dressed_zz_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let phi: f64 = rng.gen_range(-10.0..10.0);
            let mut branch = Array2::<C64>::eye(4);
            branch[[0, 0]] = C64::from_polar(1.0, phi);

            let dress = expm_i_hermitian(&sigma_z(), phi / 4.0).unwrap();
            let zz = kron(&sigma_z(), &sigma_z());
            let ising = expm_i_hermitian(&zz, -phi / 4.0).unwrap();
            let mut product = kron(&dress, &dress).dot(&ising);
            product.mapv_inplace(|v| v * C64::from_polar(1.0, phi / 4.0));
            let diff = max_abs(&(&branch - &product));
            assert!(diff < 1e-13, "phi = {phi}: identity off by {diff}");
        }
    }

    /// Conjugating the dressed mediated gate into any Pauli basis gives the
    /// two-site coupling exponential: for every phi and axis a,
    /// (R^dag (x) R^dag) CZ(4 phi) [e^{+i phi sigma_z} (x) e^{+i phi
    /// sigma_z}] (R (x) R) = e^{i phi sigma_a sigma_a}. The dressing sign
    /// is fixed by sigma_z = |r><r| - |g><g|: the branch phase sits on the
    /// doubly-ground state, whose zz eigenvalue is +1.
    #[test]
    fn dressed_mediated_gate_gives_pauli_coupling_in_every_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for axis in 0..3 {
            let r = basis_rotation(axis);
            let rr = kron(&r, &r);
            let rrd = dagger(&rr);
            for _ in 0..50 {
                let phi: f64 = rng.gen_range(-3.0..3.0);
                // CZ(4 phi) = e^{-i phi} diag(e^{4 i phi}, 1, 1, 1)
                let mut cz = Array2::<C64>::eye(4);
                cz[[0, 0]] = C64::from_polar(1.0, 4.0 * phi);
                cz.mapv_inplace(|v| v * C64::from_polar(1.0, -phi));

                let dress = expm_i_hermitian(&sigma_z(), -phi).unwrap();
                let lhs = rrd.dot(&cz).dot(&kron(&dress, &dress)).dot(&rr);

                let aa = kron(&sigma(axis), &sigma(axis));
                let rhs = expm_i_hermitian(&aa, -phi).unwrap();
                let diff = max_abs(&(&lhs - &rhs));
                assert!(
                    diff < 1e-12,
                    "axis {axis}, phi {phi}: conjugation identity off by {diff}"
                );
            }
        }
    }

    #[test]
    fn uniform_degree_matches_per_site_on_periodic_chains() {
        use crate::lattice::{Boundary, LatticeSpec};
        let periodic = LatticeSpec::chain(5, Boundary::Periodic).build().unwrap();
        let active: Vec<(usize, f64)> = (0..periodic.bonds.len()).map(|i| (i, 0.7)).collect();
        let exact = site_weights(&periodic, &active, false);
        let uniform = site_weights(&periodic, &active, true);
        assert_eq!(exact, uniform);
        assert!((exact[0] - 1.4).abs() < 1e-15);

        let open = LatticeSpec::chain(5, Boundary::Open).build().unwrap();
        let active: Vec<(usize, f64)> = (0..open.bonds.len()).map(|i| (i, 0.7)).collect();
        let exact = site_weights(&open, &active, false);
        let uniform = site_weights(&open, &active, true);
        // Open ends have one bond; the uniform rule pretends they have two.
        assert!((exact[0] - 0.7).abs() < 1e-15);
        assert!((uniform[0] - 1.4).abs() < 1e-15);
        assert_ne!(exact, uniform);
    }
}
