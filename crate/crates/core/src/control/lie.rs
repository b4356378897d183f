//! Controllability diagnostics for simultaneous multi-size driving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Acceptance tolerance for a new direction during Lie-algebra closure.
const NEW_DIRECTION_TOL: f64 = 1e-9;

/// Evidence that one shared phase profile can address every listed gadget
/// size independently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllabilityCertificate {
    pub sizes: Vec<usize>,
    pub rabi: f64,
    /// Determinant of the odd-power coupling matrix M[i][j] = a_i^(2j-1)
    /// with a_i = sqrt(S_i) Omega / 2; zero exactly when sizes repeat.
    pub coupling_det: f64,
    pub sizes_distinct: bool,
    /// Dimension of the dynamical Lie algebra generated by drives at phase
    /// 0 and pi/2, acting blockwise on every two-level sector at once.
    pub lie_dimension: usize,
    /// Full independent-su(2) dimension, 3 per size.
    pub target_dimension: usize,
    pub controllable: bool,
}

/// Block-diagonal anti-Hermitian generator: one 2x2 block per size,
/// stored row major, blocks concatenated.
type Generator = Vec<C64>;

fn drive_generator(couplings: &[f64], xi: f64) -> Generator {
    let mut g = Vec::with_capacity(4 * couplings.len());
    let e = C64::from_polar(1.0, xi);
    let mi = C64::new(0.0, -1.0);
    for &a in couplings {
        g.push(C64::new(0.0, 0.0));
        g.push(mi * a * e.conj());
        g.push(mi * a * e);
        g.push(C64::new(0.0, 0.0));
    }
    g
}

fn commutator(x: &Generator, y: &Generator) -> Generator {
    let blocks = x.len() / 4;
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for b in 0..blocks {
        let o = 4 * b;
        let (xa, ya) = (&x[o..o + 4], &y[o..o + 4]);
        let mut xy = [C64::new(0.0, 0.0); 4];
        let mut yx = [C64::new(0.0, 0.0); 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    xy[2 * i + j] += xa[2 * i + k] * ya[2 * k + j];
                    yx[2 * i + j] += ya[2 * i + k] * xa[2 * k + j];
                }
            }
        }
        for k in 0..4 {
            out[o + k] = xy[k] - yx[k];
        }
    }
    out
}

/// Real inner product on the real vector space of complex matrices.
fn dot(x: &Generator, y: &Generator) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Orthonormalizes `cand` against `basis`; appends and reports true when the
/// normalized residual exceeds the acceptance tolerance.
fn try_extend(basis: &mut Vec<Generator>, cand: Generator) -> bool {
    let n = dot(&cand, &cand).sqrt();
    if n < 1e-14 {
        return false;
    }
    let mut v: Generator = cand.iter().map(|c| c / n).collect();
    for _ in 0..2 {
        for b in basis.iter() {
            let p = dot(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
    }
    let r = dot(&v, &v).sqrt();
    if r <= NEW_DIRECTION_TOL {
        return false;
    }
    for vi in v.iter_mut() {
        *vi /= r;
    }
    basis.push(v);
    true
}

/// Checks both independence criteria: the closed-form determinant of the
/// odd-power coupling matrix, and the numerically generated Lie closure of
/// two quadrature drive generators.
pub fn controllability_check(sizes: &[usize], rabi: f64) -> Result<ControllabilityCertificate> {
    if sizes.is_empty() {
        return Err(Error::config("at least one gadget size is required"));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::config("gadget sizes must be at least 1"));
    }
    if !(rabi > 0.0) {
        return Err(Error::config("rabi frequency must be positive"));
    }
    let couplings: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt() * rabi / 2.0).collect();

    // det = prod_i a_i * prod_{i<j} (a_j^2 - a_i^2); vanishes identically
    // for repeated sizes.
    let mut det: f64 = couplings.iter().product();
    for i in 0..couplings.len() {
        for j in i + 1..couplings.len() {
            det *= couplings[j] * couplings[j] - couplings[i] * couplings[i];
        }
    }

    let mut sizes_distinct = true;
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            if sizes[i] == sizes[j] {
                sizes_distinct = false;
            }
        }
    }

    let mut basis: Vec<Generator> = Vec::new();
    try_extend(&mut basis, drive_generator(&couplings, 0.0));
    try_extend(&mut basis, drive_generator(&couplings, std::f64::consts::FRAC_PI_2));
    loop {
        let before = basis.len();
        for i in 0..before {
            for j in i + 1..before {
                let c = commutator(&basis[i], &basis[j]);
                try_extend(&mut basis, c);
            }
        }
        if basis.len() == before {
            break;
        }
    }

    let target_dimension = 3 * sizes.len();
    let lie_dimension = basis.len();
    Ok(ControllabilityCertificate {
        sizes: sizes.to_vec(),
        rabi,
        coupling_det: det,
        sizes_distinct,
        lie_dimension,
        target_dimension,
        controllable: sizes_distinct && det != 0.0 && lie_dimension == target_dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Determinant oracle: Gaussian elimination of the coupling matrix.
    fn det_by_elimination(sizes: &[usize], rabi: f64) -> f64 {
        let n = sizes.len();
        let mut m = vec![vec![0.0f64; n]; n];
        for (i, &s) in sizes.iter().enumerate() {
            let a = (s as f64).sqrt() * rabi / 2.0;
            for j in 0..n {
                m[i][j] = a.powi(2 * (j as i32 + 1) - 1);
            }
        }
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                .unwrap();
            if m[piv][col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                m.swap(piv, col);
                det = -det;
            }
            det *= m[col][col];
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for j in col..n {
                    m[row][j] -= f * m[col][j];
                }
            }
        }
        det
    }

    #[test]
    fn distinct_triple_is_fully_controllable() {
        let cert = controllability_check(&[1, 2, 3], 1.0).unwrap();
        assert!(cert.coupling_det != 0.0);
        assert!(cert.sizes_distinct);
        assert_eq!(cert.lie_dimension, 9);
        assert_eq!(cert.target_dimension, 9);
        assert!(cert.controllable);
        let oracle = det_by_elimination(&[1, 2, 3], 1.0);
        assert!(
            (cert.coupling_det - oracle).abs() < 1e-12 * oracle.abs().max(1.0),
            "{} vs {oracle}",
            cert.coupling_det
        );
    }

    #[test]
    fn repeated_sizes_are_degenerate()  {
        let cert = controllability_check(&[2, 2], 1.0).unwrap();
        assert_eq!(cert.coupling_det, 0.0);
        assert!(!cert.sizes_distinct);
        assert!(cert.lie_dimension < 6);
        assert!(!cert.controllable);
    }

    #[test]
    fn single_size_spans_one_su2() {
        let cert = controllability_check(&[1], 1.0).unwrap();
        assert_eq!(cert.lie_dimension, 3);
        assert!(cert.controllable);
    }

    #[test]
    fn pair_spans_two_su2() {
        let cert = controllability_check(&[1, 2], 1.0).unwrap();
        assert_eq!(cert.lie_dimension, 6);
        assert!(cert.controllable);
    }

    #[test]
    fn dimension_is_invariant_under_rabi_rescaling() {
        for rabi in [0.5, 1.0, 2.0] {
            let cert = controllability_check(&[1, 2, 3], rabi).unwrap();
            assert_eq!(cert.lie_dimension, 9);
            let degenerate = controllability_check(&[3, 3, 1], rabi).unwrap();
            assert!(degenerate.lie_dimension < 9);
        }
    }
}
