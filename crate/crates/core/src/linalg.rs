//! Dense complex linear algebra helpers shared across the toolkit.
//!
//! Conventions used project-wide:
//! - qubit basis index 0 = ground `|g>`, index 1 = Rydberg `|r>`;
//! - `sigma_z = |r><r| - |g><g|`, i.e. `diag(-1, +1)` in that ordering.
//!
//! The X/Y/Z matrices below satisfy the usual su(2) algebra
//! (`[X, Y] = 2i Z` cyclically); only the basis labelling differs from the
//! common computer-science convention.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const I1: C64 = C64::new(0.0, 1.0);

/// 2x2 identity.
pub fn id2() -> Array2<C64> {
    Array2::eye(2)
}

/// Pauli X in the project basis ordering (g, r).
pub fn sigma_x() -> Array2<C64> {
    ndarray::array![
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    ]
}

/// Pauli Y; equals `i X Z` with the conventions above.
pub fn sigma_y() -> Array2<C64> {
    ndarray::array![
        [C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
        [C64::new(0.0, -1.0), C64::new(0.0, 0.0)]
    ]
}

/// Pauli Z: `|r><r| - |g><g|`.
pub fn sigma_z() -> Array2<C64> {
    ndarray::array![
        [C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
    ]
}

/// Pauli by axis label, 0 = X, 1 = Y, 2 = Z.
pub fn sigma(axis: usize) -> Array2<C64> {
    match axis {
        0 => sigma_x(),
        1 => sigma_y(),
        2 => sigma_z(),
        _ => panic!("pauli axis out of range: {axis}"),
    }
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn fro_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value), via the Hermitian square.
pub fn spectral_norm(a: &Array2<C64>) -> Result<f64> {
    let ata = dagger(a).dot(a);
    let (vals, _) = eigh(&ata)?;
    Ok(vals.iter().cloned().fold(0.0f64, f64::max).max(0.0).sqrt())
}

/// Eigendecomposition of a Hermitian matrix; returns ascending eigenvalues
/// and the unitary of column eigenvectors, so `h = V diag(vals) V^dagger`.
///
/// The backing LAPACK binding receives the row-major buffer as if it were
/// column-major, so it diagonalizes the complex conjugate of the input; the
/// returned eigenvectors are conjugated here to compensate. The round trip
/// is covered by unit tests.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let std = h.as_standard_layout().to_owned();
    let (vals, vecs) = std
        .eigh(UPLO::Lower)
        .map_err(|e| Error::numeric(format!("hermitian eigendecomposition failed: {e}")))?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Eigendecomposition of a real symmetric matrix; returns ascending
/// eigenvalues and the orthogonal matrix of column eigenvectors, so
/// `h = V diag(vals) V^T`.
pub fn eigh_real(h: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let std = h.as_standard_layout().to_owned();
    std.eigh(UPLO::Lower)
        .map_err(|e| Error::numeric(format!("symmetric eigendecomposition failed: {e}")))
}

/// `exp(-i H t)` for Hermitian `H`, exact up to rounding via
/// eigendecomposition. The result is unitary by construction.
pub fn expm_i_hermitian(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let phases: Array1<C64> = vals.mapv(|lam| (-I1 * lam * t).exp());
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let p = phases[j];
        col.mapv_inplace(|z| z * p);
    }
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Principal logarithm of a unitary, returned as the Hermitian generator `H`
/// with `u = exp(-i H)` and eigenphases of `H` in `(-pi, pi]`.
///
/// Works entirely through Hermitian eigendecompositions: `u` is normal, so
/// the commuting Hermitian pair `A = (u + u^dag)/2`, `B = (u - u^dag)/(2i)`
/// is diagonalized simultaneously (within each degenerate eigenspace of `A`
/// the restriction of `B` is diagonalized) and the eigenphase is read off as
/// `atan2`.
pub fn log_unitary(u: &Array2<C64>) -> Result<Array2<C64>> {
    let n = u.nrows();
    let ud = dagger(u);
    let a = (u + &ud).mapv(|z| z * 0.5);
    let b = (u - &ud).mapv(|z| z * C64::new(0.0, -0.5));
    let (avals, avecs) = eigh(&a)?;

    // Group nearly equal eigenvalues of A; `u` unitary means |eigenvalues|
    // are bounded by 1, so an absolute tolerance is adequate.
    let tol = 1e-8;
    let mut q = avecs.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (avals[end] - avals[start]).abs() < tol {
            end += 1;
        }
        if end - start > 1 {
            let w = avecs.slice(ndarray::s![.., start..end]).to_owned();
            let bg = dagger(&w).dot(&b).dot(&w);
            let (_, r) = eigh(&bg)?;
            let rotated = w.dot(&r);
            q.slice_mut(ndarray::s![.., start..end]).assign(&rotated);
        }
        start = end;
    }

    // Eigenphases from the diagonal of Q^dag u Q.
    let d = dagger(&q).dot(u).dot(&q);
    let mut h = Array2::zeros(u.dim());
    for j in 0..n {
        h[(j, j)] = C64::new(-d[(j, j)].arg(), 0.0);
    }
    Ok(q.dot(&h).dot(&dagger(&q)))
}

/// Tensor product of single-qubit operators placed on `qubit` within an
/// `n`-qubit register, identity elsewhere. Qubit 0 is the least significant
/// bit of the basis index.
pub fn embed_single(op: &Array2<C64>, qubit: usize, n: usize) -> Array2<C64> {
    let dim = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    let bit = 1usize << qubit;
    for col in 0..dim {
        let cb = (col & bit != 0) as usize;
        for rb in 0..2 {
            let v = op[(rb, cb)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let row = (col & !bit) | (rb << qubit);
            out[(row, col)] += v;
        }
    }
    out
}

/// Apply a single-qubit gate in place to a dense state over `n` qubits.
/// Qubit 0 is the least significant bit.
pub fn apply_single(op: &[[C64; 2]; 2], qubit: usize, psi: &mut [C64]) {
    let bit = 1usize << qubit;
    let dim = psi.len();
    let mut base = 0usize;
    while base < dim {
        if base & bit == 0 {
            let a = psi[base];
            let b = psi[base | bit];
            psi[base] = op[0][0] * a + op[0][1] * b;
            psi[base | bit] = op[1][0] * a + op[1][1] * b;
        }
        base += 1;
    }
}

/// Apply a two-qubit diagonal phase gate `diag` (indexed by `b_hi * 2 + b_lo`
/// over qubits `(q_hi, q_lo)`) in place.
pub fn apply_two_diag(diag: &[C64; 4], q_lo: usize, q_hi: usize, psi: &mut [C64]) {
    let lo = 1usize << q_lo;
    let hi = 1usize << q_hi;
    for (idx, amp) in psi.iter_mut().enumerate() {
        let k = ((idx & hi != 0) as usize) * 2 + ((idx & lo != 0) as usize);
        *amp *= diag[k];
    }
}

/// Inner product `<a|b>`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Squared two-norm.
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_close(a: &Array2<C64>, b: &Array2<C64>, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        let d = a - b;
        assert!(fro_norm(&d) < tol, "matrices differ by {}", fro_norm(&d));
    }

    #[test]
    fn pauli_algebra_holds_in_project_basis() {
        let x = sigma_x();
        let y = sigma_y();
        let z = sigma_z();
        let comm = x.dot(&y) - y.dot(&x);
        assert_close(&comm, &z.mapv(|v| v * C64::new(0.0, 2.0)), 1e-15);
        let comm = y.dot(&z) - z.dot(&y);
        assert_close(&comm, &x.mapv(|v| v * C64::new(0.0, 2.0)), 1e-15);
        let comm = z.dot(&x) - x.dot(&z);
        assert_close(&comm, &y.mapv(|v| v * C64::new(0.0, 2.0)), 1e-15);
        for m in [&x, &y, &z] {
            assert_close(&m.dot(m), &id2(), 1e-15);
        }
        // sigma_z |g> = -|g> under the (g, r) ordering.
        assert_abs_diff_eq!(z[(0, 0)].re, -1.0);
    }

    #[test]
    fn expm_matches_power_series_oracle() {
        // Oracle: plain Taylor series, valid for small norms.
        let h = ndarray::array![
            [C64::new(0.3, 0.0), C64::new(0.1, -0.2)],
            [C64::new(0.1, 0.2), C64::new(-0.5, 0.0)]
        ];
        let t = 0.7;
        let mut series = Array2::<C64>::eye(2);
        let mut term = Array2::<C64>::eye(2);
        for k in 1..40 {
            term = term.dot(&h).mapv(|v| v * (-I1 * t) / C64::new(k as f64, 0.0));
            series = series + &term;
        }
        let fast = expm_i_hermitian(&h, t).unwrap();
        assert_close(&fast, &series, 1e-13);
        // Unitarity.
        assert_close(&dagger(&fast).dot(&fast), &id2(), 1e-14);
    }

    #[test]
    fn real_symmetric_eigh_reconstructs_input() {
        let h = ndarray::array![
            [1.0, 0.3, -0.2],
            [0.3, -0.7, 0.5],
            [-0.2, 0.5, 0.1]
        ];
        let (vals, vecs) = eigh_real(&h).unwrap();
        let lam = Array2::from_diag(&vals);
        let back = vecs.dot(&lam).dot(&vecs.t());
        let diff = (&back - &h).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 1e-12, "reconstruction residual {diff}");
        let gram = vecs.t().dot(&vecs);
        let eye = Array2::<f64>::eye(3);
        let ortho = (&gram - &eye).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(ortho < 1e-12);
    }

    #[test]
    fn log_unitary_inverts_expm() {
        let h = ndarray::array![
            [C64::new(0.2, 0.0), C64::new(0.4, 0.1)],
            [C64::new(0.4, -0.1), C64::new(-0.3, 0.0)]
        ];
        let u = expm_i_hermitian(&h, 1.0).unwrap();
        let h_back = log_unitary(&u).unwrap();
        assert_close(&h_back, &h, 1e-10);
    }

    #[test]
    fn embed_single_places_operator_on_correct_qubit() {
        let x = sigma_x();
        let full = embed_single(&x, 0, 2);
        let expect = kron(&id2(), &x);
        assert_close(&full, &expect, 1e-15);
        let full = embed_single(&x, 1, 2);
        let expect = kron(&x, &id2());
        assert_close(&full, &expect, 1e-15);
    }

    #[test]
    fn apply_single_agrees_with_dense_embedding() {
        let op = sigma_y();
        let opa = [[op[(0, 0)], op[(0, 1)]], [op[(1, 0)], op[(1, 1)]]];
        let mut psi = vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(-0.5, 0.0),
            C64::new(0.0, -0.5),
        ];
        let dense = embed_single(&op, 1, 2);
        let as_vec = Array1::from(psi.clone());
        let expect = dense.dot(&as_vec);
        apply_single(&opa, 1, &mut psi);
        for (a, b) in psi.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
