//! Stabilizer propagation of a Pauli observable at Clifford parameter points.
//!
//! When every bond angle is a multiple of pi/4 and every field angle a
//! multiple of pi/2, each layer exponential maps any Pauli string to a single
//! Pauli string. The Heisenberg evolution then reduces to bitmask updates,
//! the size distribution collapses to a point mass at the string weight, and
//! g(t) = 3^{-weight} follows exactly. Because the state space never appears,
//! this scales to lattices of hundreds of sites and serves as an independent
//! oracle for the dense size-distribution code.

use crate::compiler::{chronological_layers, QcaModel, QcaVariant};
use crate::error::{Error, Result};

use super::sample::Observable;

/// Absolute tolerance when testing angles against the Clifford grid.
const ANGLE_TOL: f64 = 1e-9;

/// A Pauli string over an arbitrary number of sites with an i^phase prefactor.
struct SparsePauli {
    x: Vec<u64>,
    z: Vec<u64>,
    /// Exponent of i in the prefactor, modulo 4. Hermitian strings keep it
    /// even, so the prefactor stays a real sign.
    phase: u8,
}

impl SparsePauli {
    fn new(n: usize) -> Self {
        let blocks = (n + 63) / 64;
        SparsePauli {
            x: vec![0; blocks],
            z: vec![0; blocks],
            phase: 0,
        }
    }

    fn bit(mask: &[u64], site: usize) -> u8 {
        ((mask[site / 64] >> (site % 64)) & 1) as u8
    }

    fn toggle(mask: &mut [u64], site: usize) {
        mask[site / 64] ^= 1u64 << (site % 64);
    }

    fn site_bits(&self, site: usize) -> (u8, u8) {
        (Self::bit(&self.x, site), Self::bit(&self.z, site))
    }

    /// Whether the string anticommutes with a single-site Pauli (gx, gz).
    fn anticommutes_at(&self, site: usize, gx: u8, gz: u8) -> bool {
        let (x, z) = self.site_bits(site);
        (x & gz) ^ (z & gx) == 1
    }

    /// Right-multiply by the single-site Pauli (gx, gz), tracking the phase
    /// of the product in the i^{xz} X^x Z^z string convention.
    fn mul_site(&mut self, site: usize, gx: u8, gz: u8) {
        let (x1, z1) = self.site_bits(site);
        let x3 = x1 ^ gx;
        let z3 = z1 ^ gz;
        let e = (x1 * z1 + gx * gz + 2 * (z1 & gx) + 4 - x3 * z3) % 4;
        self.phase = (self.phase + e) % 4;
        if gx == 1 {
            Self::toggle(&mut self.x, site);
        }
        if gz == 1 {
            Self::toggle(&mut self.z, site);
        }
    }

    fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(self.z.iter())
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }
}

/// (x, z) bits of the Pauli on a given axis: X, Y, or Z.
fn axis_bits(axis: usize) -> (u8, u8) {
    match axis {
        0 => (1, 0),
        1 => (1, 1),
        _ => (0, 1),
    }
}

/// Nearest integer multiple, or None when the angle is off the grid.
fn grid_multiple(angle: f64, unit: f64) -> Option<i64> {
    let ratio = angle / unit;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= ANGLE_TOL {
        Some(nearest as i64)
    } else {
        None
    }
}

/// Checks that every coupling sits on the Clifford grid: bond angles on
/// multiples of pi/4, field angles on multiples of pi/2.
fn validate_clifford(model: &QcaModel) -> Result<()> {
    let quarter = std::f64::consts::FRAC_PI_4;
    let half = std::f64::consts::FRAC_PI_2;
    let constraints: Vec<(&'static str, f64, f64)> = match model.variant {
        QcaVariant::KickedIsing { j, h, b } => {
            vec![("j", j, quarter), ("h", h, half), ("b", b, half)]
        }
        QcaVariant::InhomKickedIsing { j_x, j_y, h, b } => vec![
            ("j_x", j_x, quarter),
            ("j_y", j_y, quarter),
            ("h", h, half),
            ("b", b, half),
        ],
        QcaVariant::KitaevFloquet {
            j_x,
            j_y,
            j_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            ("j_x", j_x, quarter),
            ("j_y", j_y, quarter),
            ("j_z", j_z, quarter),
            ("h_x", h_x, half),
            ("h_y", h_y, half),
            ("h_z", h_z, half),
        ],
        QcaVariant::TwoLocal {
            c_x,
            c_y,
            c_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            ("c_x", c_x, quarter),
            ("c_y", c_y, quarter),
            ("c_z", c_z, quarter),
            ("h_x", h_x, half),
            ("h_y", h_y, half),
            ("h_z", h_z, half),
        ],
    };
    for (name, value, unit) in constraints {
        if grid_multiple(model.tau * value, unit).is_none() {
            let grid = if (unit - quarter).abs() < 1e-15 {
                "pi/4"
            } else {
                "pi/2"
            };
            return Err(Error::domain(format!(
                "coupling {name} = {value} is off the Clifford grid: tau * {name} \
                 must be a multiple of {grid}"
            )));
        }
    }
    Ok(())
}

/// Weight of O(t) and the exact g(t) = 3^{-weight} at a Clifford point.
pub fn clifford_pauli_weight(
    model: &QcaModel,
    observable: &Observable,
    t: usize,
) -> Result<(usize, f64)> {
    model.validate()?;
    validate_clifford(model)?;
    let lattice = model.lattice.build()?;
    let n = lattice.n_sites();
    observable.validate(n)?;

    let mut string = SparsePauli::new(n);
    let (ox, oz) = axis_bits(observable.axis);
    for &site in &observable.sites {
        if ox == 1 {
            SparsePauli::toggle(&mut string.x, site);
        }
        if oz == 1 {
            SparsePauli::toggle(&mut string.z, site);
        }
    }

    let layers = chronological_layers(model, &lattice);
    for _ in 0..t {
        // Heisenberg order: conjugate by the final layer of the step first.
        for layer in layers.iter().rev() {
            let (gx, gz) = axis_bits(layer.axis);
            for &(bond, coupling) in &layer.bonds {
                let (a, b) = (lattice.bonds[bond].a, lattice.bonds[bond].b);
                let anti = string.anticommutes_at(a, gx, gz)
                    ^ string.anticommutes_at(b, gx, gz);
                if !anti {
                    continue;
                }
                let theta = model.tau * coupling;
                // e^{i theta G} O e^{-i theta G} = cos(2 theta) O
                //   - i sin(2 theta) O G for {O, G} = 0.
                let r = grid_multiple(2.0 * theta, std::f64::consts::FRAC_PI_2)
                    .expect("validated bond angle")
                    .rem_euclid(4);
                match r {
                    0 => {}
                    2 => string.phase = (string.phase + 2) % 4,
                    _ => {
                        string.mul_site(a, gx, gz);
                        string.mul_site(b, gx, gz);
                        // -i for sin = +1, +i for sin = -1.
                        let extra = if r == 1 { 3 } else { 1 };
                        string.phase = (string.phase + extra) % 4;
                    }
                }
            }
            if layer.field != 0.0 {
                let phi = model.tau * layer.field;
                let r = grid_multiple(2.0 * phi, std::f64::consts::PI)
                    .expect("validated field angle")
                    .rem_euclid(2);
                if r == 1 {
                    for site in 0..n {
                        if string.anticommutes_at(site, gx, gz) {
                            string.phase = (string.phase + 2) % 4;
                        }
                    }
                }
            }
        }
    }
    debug_assert!(string.phase % 2 == 0, "Hermitian string kept a real sign");
    let weight = string.weight();
    Ok((weight, 3f64.powi(-(weight as i32))))
}
