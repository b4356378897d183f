//! Update-rule descriptions and their exact dense step unitaries.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BondClass, Lattice, LatticeFamily, LatticeSpec};
use crate::linalg::{expm_i_hermitian, sigma, C64};

/// Dense step unitaries and layer Hamiltonians are built up to this many
/// data qubits.
pub const MAX_DENSE_QUBITS: usize = 14;

/// Pauli axis index into [`sigma`]: 0 = X, 1 = Y, 2 = Z.
pub type PauliAxis = usize;

pub const AXIS_X: PauliAxis = 0;
pub const AXIS_Y: PauliAxis = 1;
pub const AXIS_Z: PauliAxis = 2;

/// Coupling content of a cellular-automaton update rule.
///
/// Every variant advances one Floquet step as an ordered product of layer
/// exponentials; the layer structure is fixed by the variant and the
/// couplings scale the bond and field terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QcaVariant {
    /// Ising layer (zz bonds plus longitudinal field) followed by a
    /// transverse kick.
    KickedIsing { j: f64, h: f64, b: f64 },
    /// Kicked Ising with direction-dependent bond couplings on a square
    /// lattice; horizontal bonds carry `j_x`, vertical bonds `j_y`.
    InhomKickedIsing { j_x: f64, j_y: f64, h: f64, b: f64 },
    /// Three bond-orientation layers xx, yy, zz on a honeycomb lattice,
    /// applied in the order zz, yy, xx, each with its own field.
    KitaevFloquet {
        j_x: f64,
        j_y: f64,
        j_z: f64,
        h_x: f64,
        h_y: f64,
        h_z: f64,
    },
    /// Axis-decomposed two-local Hamiltonian digitization: one layer per
    /// Pauli axis over every bond, applied in the order x, y, z.
    TwoLocal {
        c_x: f64,
        c_y: f64,
        c_z: f64,
        h_x: f64,
        h_y: f64,
        h_z: f64,
    },
}

impl QcaVariant {
    pub fn name(&self) -> &'static str {
        match self {
            QcaVariant::KickedIsing { .. } => "kicked_ising",
            QcaVariant::InhomKickedIsing { .. } => "inhom_kicked_ising",
            QcaVariant::KitaevFloquet { .. } => "kitaev_floquet",
            QcaVariant::TwoLocal { .. } => "two_local",
        }
    }

    fn couplings(&self) -> Vec<(&'static str, f64)> {
        match *self {
            QcaVariant::KickedIsing { j, h, b } => vec![("j", j), ("h", h), ("b", b)],
            QcaVariant::InhomKickedIsing { j_x, j_y, h, b } => {
                vec![("j_x", j_x), ("j_y", j_y), ("h", h), ("b", b)]
            }
            QcaVariant::KitaevFloquet {
                j_x,
                j_y,
                j_z,
                h_x,
                h_y,
                h_z,
            } => vec![
                ("j_x", j_x),
                ("j_y", j_y),
                ("j_z", j_z),
                ("h_x", h_x),
                ("h_y", h_y),
                ("h_z", h_z),
            ],
            QcaVariant::TwoLocal {
                c_x,
                c_y,
                c_z,
                h_x,
                h_y,
                h_z,
            } => vec![
                ("c_x", c_x),
                ("c_y", c_y),
                ("c_z", c_z),
                ("h_x", h_x),
                ("h_y", h_y),
                ("h_z", h_z),
            ],
        }
    }
}

/// A model instance: update rule, Floquet time, and the data-atom lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcaModel {
    pub variant: QcaVariant,
    pub tau: f64,
    pub lattice: LatticeSpec,
}

impl QcaModel {
    pub fn new(variant: QcaVariant, tau: f64, lattice: LatticeSpec) -> Result<Self> {
        let model = QcaModel {
            variant,
            tau,
            lattice,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks coupling finiteness and variant/lattice compatibility.
    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if !self.tau.is_finite() {
            return Err(Error::config("floquet time must be finite"));
        }
        for (name, value) in self.variant.couplings() {
            if !value.is_finite() {
                return Err(Error::config(format!("coupling {name} must be finite")));
            }
        }
        let family = self.lattice.family;
        match self.variant {
            QcaVariant::InhomKickedIsing { .. } if family != LatticeFamily::Square => {
                Err(Error::config(format!(
                    "inhomogeneous kicked Ising needs a square lattice, got {family:?}"
                )))
            }
            QcaVariant::KitaevFloquet { .. }
                if family != LatticeFamily::Honeycomb && family != LatticeFamily::Hexagon =>
            {
                Err(Error::config(format!(
                    "the Kitaev update rule needs a honeycomb lattice, got {family:?}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// One exponential layer of a step: `exp(-i tau H)` with
/// `H = sum_b coupling_b * sigma_axis sigma_axis + field * sum_i sigma_axis`.
#[derive(Debug, Clone)]
pub struct StepLayer {
    pub axis: PauliAxis,
    /// Bond index into `lattice.bonds` together with its coupling.
    pub bonds: Vec<(usize, f64)>,
    pub field: f64,
}

/// Layers of one step in the order they are applied to the state.
pub fn chronological_layers(model: &QcaModel, lattice: &Lattice) -> Vec<StepLayer> {
    let all = |c: f64| -> Vec<(usize, f64)> {
        (0..lattice.bonds.len()).map(|i| (i, c)).collect()
    };
    let by_class = |class: BondClass, c: f64| -> Vec<(usize, f64)> {
        lattice
            .bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class == class)
            .map(|(i, _)| (i, c))
            .collect()
    };
    match model.variant {
        QcaVariant::KickedIsing { j, h, b } => vec![
            StepLayer {
                axis: AXIS_Z,
                bonds: all(j),
                field: h,
            },
            StepLayer {
                axis: AXIS_X,
                bonds: vec![],
                field: b,
            },
        ],
        QcaVariant::InhomKickedIsing { j_x, j_y, h, b } => {
            let mut bonds = by_class(BondClass::X, j_x);
            bonds.extend(by_class(BondClass::Y, j_y));
            bonds.sort_unstable_by_key(|&(i, _)| i);
            vec![
                StepLayer {
                    axis: AXIS_Z,
                    bonds,
                    field: h,
                },
                StepLayer {
                    axis: AXIS_X,
                    bonds: vec![],
                    field: b,
                },
            ]
        }
        QcaVariant::KitaevFloquet {
            j_x,
            j_y,
            j_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            StepLayer {
                axis: AXIS_Z,
                bonds: by_class(BondClass::Z, j_z),
                field: h_z,
            },
            StepLayer {
                axis: AXIS_Y,
                bonds: by_class(BondClass::Y, j_y),
                field: h_y,
            },
            StepLayer {
                axis: AXIS_X,
                bonds: by_class(BondClass::X, j_x),
                field: h_x,
            },
        ],
        QcaVariant::TwoLocal {
            c_x,
            c_y,
            c_z,
            h_x,
            h_y,
            h_z,
        } => vec![
            StepLayer {
                axis: AXIS_X,
                bonds: all(c_x),
                field: h_x,
            },
            StepLayer {
                axis: AXIS_Y,
                bonds: all(c_y),
                field: h_y,
            },
            StepLayer {
                axis: AXIS_Z,
                bonds: all(c_z),
                field: h_z,
            },
        ],
    }
}

pub(crate) fn check_dense_cap(n: usize, what: &str) -> Result<()> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Resource {
            what: what.into(),
            required: n,
            cap: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

/// Dense Hamiltonian of one layer on the 2^N data register. Qubit i is bit i
/// of the basis index.
pub fn layer_hamiltonian(layer: &StepLayer, lattice: &Lattice) -> Result<Array2<C64>> {
    let n = lattice.n_sites();
    check_dense_cap(n, "dense layer hamiltonian")?;
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    let pauli = sigma(layer.axis);
    // sigma sigma on a bond is the product of the two commuting embeddings.
    for &(bond, coupling) in &layer.bonds {
        if coupling == 0.0 {
            continue;
        }
        let b = &lattice.bonds[bond];
        let term = crate::linalg::embed_single(&pauli, b.a, n)
            .dot(&crate::linalg::embed_single(&pauli, b.b, n));
        h.scaled_add(C64::new(coupling, 0.0), &term);
    }
    if layer.field != 0.0 {
        for site in 0..n {
            let term = crate::linalg::embed_single(&pauli, site, n);
            h.scaled_add(C64::new(layer.field, 0.0), &term);
        }
    }
    Ok(h)
}

/// Exact matrix for one application of the update rule on the data qubits.
///
/// The product runs over the variant's layer exponentials with the first
/// applied layer rightmost.
pub fn ideal_step_unitary(model: &QcaModel) -> Result<Array2<C64>> {
    model.validate()?;
    let lattice = model.lattice.build()?;
    let n = lattice.n_sites();
    check_dense_cap(n, "dense step unitary")?;
    let dim = 1usize << n;
    let mut u = Array2::<C64>::eye(dim);
    for layer in chronological_layers(model, &lattice) {
        let h = layer_hamiltonian(&layer, &lattice)?;
        let step = expm_i_hermitian(&h, model.tau)?;
        u = step.dot(&u);
    }
    Ok(u)
}
