//! The single-qubit tetrahedral state ensemble and its moment operators.
//!
//! Four pure states whose Bloch vectors point at the vertices of a regular
//! tetrahedron form a projective 2-design: averages of any quantity that is
//! quadratic in the density matrix agree with the Haar average over the full
//! Bloch sphere. Sampling initial product states from this ensemble therefore
//! reproduces Haar-random product-state statistics of the chaos diagnostic
//! exactly, while each state is preparable by two hardware rotations.
//!
//! `tetra_moments` returns the k-th moment operator
//! N_k = (1/4) sum_c (|mu_c><mu_c|)^(tensor k) both by direct summation and,
//! for k <= 4, from the closed-form Pauli decomposition, which doubles as an
//! independent oracle for the ensemble's design properties.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{embed_single, id2, kron, sigma};

/// Number of states in the ensemble.
pub const TETRA_COUNT: usize = 4;

/// Polar angle of the tetrahedron vertices: cos(theta) = 1/sqrt(3).
fn tetra_theta() -> f64 {
    (1.0 / 3f64.sqrt()).acos()
}

/// Azimuthal offset of the vertex pair in the upper hemisphere.
const TETRA_PHI: f64 = std::f64::consts::FRAC_PI_4;

/// Amplitudes (c_g, c_r) of ensemble state `color` (1..=4).
///
/// The four Bloch vectors are (+-1, +-1, +-1)/sqrt(3) with an even number of
/// minus signs, a regular tetrahedron with pairwise overlaps |<mu_i|mu_j>|^2
/// equal to 1/3.
pub fn tetra_state(color: usize) -> Result<Array1<C64>> {
    let half = 0.5 * tetra_theta();
    let (c, s) = (half.cos(), half.sin());
    let phase = C64::from_polar(1.0, TETRA_PHI);
    let (a, b) = match color {
        1 => (C64::new(c, 0.0), phase * s),
        2 => (C64::new(c, 0.0), -phase * s),
        3 => (C64::new(s, 0.0), phase.conj() * c),
        4 => (C64::new(s, 0.0), -phase.conj() * c),
        _ => {
            return Err(Error::config(format!(
                "tetrahedral color must be 1..=4, got {color}"
            )))
        }
    };
    Ok(Array1::from(vec![a, b]))
}

/// Unitary preparing ensemble state `color` from the ground state, as a
/// z-rotation following a y-rotation. Columns are orthonormal, and
/// U|g> equals `tetra_state(color)` up to a global phase.
pub fn tetra_unitary(color: usize) -> Result<Array2<C64>> {
    // Target (cos(a/2), e^{ib} sin(a/2)); the matching Euler angles follow
    // from R_y(-a)|g> = cos(a/2)|g> + sin(a/2)|r> and
    // R_z(beta) = diag(e^{i beta/2}, e^{-i beta/2}) in this convention.
    let theta = tetra_theta();
    let (a, b) = match color {
        1 => (theta, TETRA_PHI),
        2 => (theta, TETRA_PHI + std::f64::consts::PI),
        3 => (std::f64::consts::PI - theta, -TETRA_PHI),
        4 => (std::f64::consts::PI - theta, std::f64::consts::PI - TETRA_PHI),
        _ => {
            return Err(Error::config(format!(
                "tetrahedral color must be 1..=4, got {color}"
            )))
        }
    };
    let ry = rotation_y(-a);
    let rz = rotation_z(-b);
    Ok(rz.dot(&ry))
}

/// e^{-i (angle/2) sigma_y}.
fn rotation_y(angle: f64) -> Array2<C64> {
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let mi = C64::new(0.0, -1.0);
    let sy = crate::linalg::sigma_y();
    id2().mapv(|x| x * c) + sy.mapv(|x| x * mi * s)
}

/// e^{-i (angle/2) sigma_z}.
fn rotation_z(angle: f64) -> Array2<C64> {
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let mi = C64::new(0.0, -1.0);
    let sz = crate::linalg::sigma_z();
    id2().mapv(|x| x * c) + sz.mapv(|x| x * mi * s)
}

/// k-th moment operator of the ensemble, with the direct sum always present
/// and the closed-form Pauli decomposition attached for k <= 4.
pub struct TetraMoments {
    pub order: usize,
    /// (1/4) sum_c rho_c^(tensor k), computed by direct summation.
    pub direct: Array2<C64>,
    /// Closed-form Pauli decomposition, available for k <= 4.
    pub closed_form: Option<Array2<C64>>,
}

/// Largest moment order served by direct summation (dimension 2^k).
pub const MAX_MOMENT_ORDER: usize = 8;

/// Moment operators N_k of the tetrahedral ensemble.
pub fn tetra_moments(order: usize) -> Result<TetraMoments> {
    if order == 0 || order > MAX_MOMENT_ORDER {
        return Err(Error::config(format!(
            "moment order must be 1..={MAX_MOMENT_ORDER}, got {order}"
        )));
    }
    let dim = 1usize << order;
    let mut direct = Array2::<C64>::zeros((dim, dim));
    for color in 1..=TETRA_COUNT {
        let psi = tetra_state(color)?;
        let rho = outer(&psi);
        let mut acc = Array2::<C64>::eye(1);
        for _ in 0..order {
            acc = kron(&acc, &rho);
        }
        direct = direct + acc;
    }
    direct.mapv_inplace(|x| x * 0.25);
    let closed_form = match order {
        1 => Some(id2().mapv(|x| x * 0.5)),
        2 => Some(closed_form_2()),
        3 => Some(closed_form_3()),
        4 => Some(closed_form_4()),
        _ => None,
    };
    Ok(TetraMoments {
        order,
        direct,
        closed_form,
    })
}

fn outer(psi: &Array1<C64>) -> Array2<C64> {
    let n = psi.len();
    let mut rho = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            rho[[i, j]] = psi[i] * psi[j].conj();
        }
    }
    rho
}

/// Pauli string sigma^{axes[0]}_{sites[0]} ... on `n` qubits.
fn pauli_string(n: usize, terms: &[(usize, usize)]) -> Array2<C64> {
    let mut acc = Array2::<C64>::eye(1 << n);
    for &(site, axis) in terms {
        acc = acc.dot(&embed_single(&sigma(axis), site, n));
    }
    acc
}

/// N_2 = (1/4)[I + (1/3) sum_a sigma^a tensor sigma^a].
fn closed_form_2() -> Array2<C64> {
    let n = 2;
    let mut acc = Array2::<C64>::eye(1 << n);
    for axis in 0..3 {
        let term = pauli_string(n, &[(0, axis), (1, axis)]);
        acc = acc + term.mapv(|x| x / 3.0);
    }
    acc.mapv(|x| x * 0.25)
}

/// Sum over the six axis permutations of sigma^x sigma^y sigma^z placed on
/// the three given sites.
fn xyz_permutation_sum(n: usize, sites: [usize; 3]) -> Array2<C64> {
    let mut acc = Array2::<C64>::zeros((1 << n, 1 << n));
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for perm in perms {
        let terms = [(sites[0], perm[0]), (sites[1], perm[1]), (sites[2], perm[2])];
        acc = acc + pauli_string(n, &terms);
    }
    acc
}

/// N_3 = I/8 + (1/24) sum_a sum_{i<j} sigma^a_i sigma^a_j
///       + (1/(8 sqrt 27)) sum_{perms} sigma^x sigma^y sigma^z.
fn closed_form_3() -> Array2<C64> {
    let n = 3;
    let mut acc = Array2::<C64>::eye(1 << n).mapv(|x| x / 8.0);
    for axis in 0..3 {
        for i in 0..n {
            for j in (i + 1)..n {
                let term = pauli_string(n, &[(i, axis), (j, axis)]);
                acc = acc + term.mapv(|x| x / 24.0);
            }
        }
    }
    let chi = xyz_permutation_sum(n, [0, 1, 2]);
    acc + chi.mapv(|x| x / (8.0 * 27f64.sqrt()))
}

/// N_4 = I/16 + (1/48) sum_a sum_{i<j} sigma^a_i sigma^a_j
///       + (1/(16 sqrt 27)) sum_{i<j<l} sum_{perms} sigma^x sigma^y sigma^z
///       + (1/144) [sum_a (sigma^a)^(tensor 4)
///                  + sum_{a != b} sum_{arrangements} sigma^{aabb}].
fn closed_form_4() -> Array2<C64> {
    let n = 4;
    let dim = 1 << n;
    let mut acc = Array2::<C64>::eye(dim).mapv(|x| x / 16.0);
    for axis in 0..3 {
        for i in 0..n {
            for j in (i + 1)..n {
                let term = pauli_string(n, &[(i, axis), (j, axis)]);
                acc = acc + term.mapv(|x| x / 48.0);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for l in (j + 1)..n {
                let chi = xyz_permutation_sum(n, [i, j, l]);
                acc = acc + chi.mapv(|x| x / (16.0 * 27f64.sqrt()));
            }
        }
    }
    // Fully covered strings: all four sites carry the same axis, or two
    // sites carry axis a and two carry axis b. For each unordered axis pair
    // the six distinct arrangements are enumerated by the placement of the
    // first axis.
    let mut quartic = Array2::<C64>::zeros((dim, dim));
    for a in 0..3 {
        quartic = quartic + pauli_string(n, &[(0, a), (1, a), (2, a), (3, a)]);
        for b in (a + 1)..3 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut terms = Vec::with_capacity(4);
                    for site in 0..n {
                        let axis = if site == i || site == j { a } else { b };
                        terms.push((site, axis));
                    }
                    quartic = quartic + pauli_string(n, &terms);
                }
            }
        }
    }
    acc + quartic.mapv(|x| x / 144.0)
}

/// Haar second-moment operator on two copies of a qubit: P_sym / 3.
pub fn haar_second_moment() -> Array2<C64> {
    let dim = 4;
    let mut swap = Array2::<C64>::zeros((dim, dim));
    for i in 0..2 {
        for j in 0..2 {
            // |j i> <i j| in the two-copy space.
            swap[[(j << 1) | i, (i << 1) | j]] = C64::new(1.0, 0.0);
        }
    }
    let eye = Array2::<C64>::eye(dim);
    (eye + swap).mapv(|x| x / 6.0)
}
