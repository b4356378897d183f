//! Enumeration of the blockade-constrained configuration basis.

use crate::error::{Error, Result};
use crate::lattice::{AtomArray, Species};

/// Hard ceiling on counted dimensions, to keep the resource-error path
/// terminating even for absurdly underconstrained arrays.
const COUNT_SENTINEL: usize = 1 << 30;

/// Default memory cap on the basis dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 22;

/// The blockade-allowed configuration basis of an atom array.
///
/// A configuration is a bitmask over atom ids (bit i = atom i excited);
/// allowed means no blockade edge has both endpoints excited. Configurations
/// are stored in lexicographic order of their `g`/`r` strings with atom 0
/// written first, i.e. sorted by bit-reversed value.
#[derive(Debug, Clone)]
pub struct ConstrainedBasis {
    n_atoms: usize,
    n_data: usize,
    configs: Vec<u64>,
    masks: Vec<u64>,
    data_mask: u64,
    ancilla_mask: u64,
}

impl ConstrainedBasis {
    /// Enumerate with the default memory cap.
    pub fn enumerate(array: &AtomArray) -> Result<Self> {
        Self::enumerate_with_cap(array, DEFAULT_MAX_DIM)
    }

    pub fn enumerate_with_cap(array: &AtomArray, max_dim: usize) -> Result<Self> {
        let masks = array.blockade_masks()?;
        let n = array.n_atoms();
        let dim = count_allowed(&masks, COUNT_SENTINEL);
        if dim > max_dim {
            return Err(Error::Resource {
                what: "constrained basis dimension".into(),
                required: dim,
                cap: max_dim,
            });
        }
        let mut configs = Vec::with_capacity(dim);
        collect_allowed(&masks, n, 0, 0, &mut configs);
        let mut data_mask = 0u64;
        let mut ancilla_mask = 0u64;
        for atom in &array.atoms {
            match atom.species {
                Species::Data => data_mask |= 1 << atom.id,
                Species::Ancilla => ancilla_mask |= 1 << atom.id,
            }
        }
        Ok(ConstrainedBasis {
            n_atoms: n,
            n_data: array.n_data,
            configs,
            masks,
            data_mask,
            ancilla_mask,
        })
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> u64 {
        self.configs[index]
    }

    /// Blockade-neighbor bitmask of one atom.
    pub fn mask(&self, atom: usize) -> u64 {
        self.masks[atom]
    }

    pub fn data_mask(&self) -> u64 {
        self.data_mask
    }

    pub fn ancilla_mask(&self) -> u64 {
        self.ancilla_mask
    }

    pub fn species_mask(&self, species: Species) -> u64 {
        match species {
            Species::Data => self.data_mask,
            Species::Ancilla => self.ancilla_mask,
        }
    }

    /// Index of a configuration, or `None` if it is blockade-forbidden.
    pub fn index_of(&self, config: u64) -> Option<usize> {
        let key = lex_key(config, self.n_atoms);
        self.configs
            .binary_search_by_key(&key, |&c| lex_key(c, self.n_atoms))
            .ok()
    }

    /// The all-ground configuration always sorts first.
    pub fn ground_index(&self) -> usize {
        0
    }

    /// Render a configuration as a `g`/`r` string, atom 0 first.
    pub fn bitstring(&self, config: u64) -> String {
        (0..self.n_atoms)
            .map(|i| if config & (1 << i) != 0 { 'r' } else { 'g' })
            .collect()
    }
}

fn lex_key(config: u64, n_atoms: usize) -> u64 {
    config.reverse_bits() >> (64 - n_atoms as u32)
}

fn count_allowed(masks: &[u64], sentinel: usize) -> usize {
    fn rec(masks: &[u64], i: usize, set: u64, sentinel: usize, acc: &mut usize) {
        if *acc >= sentinel {
            return;
        }
        if i == masks.len() {
            *acc += 1;
            return;
        }
        rec(masks, i + 1, set, sentinel, acc);
        if masks[i] & set == 0 {
            rec(masks, i + 1, set | (1 << i), sentinel, acc);
        }
    }
    let mut acc = 0;
    rec(masks, 0, 0, sentinel, &mut acc);
    acc
}

/// Depth-first over atoms in id order, ground branch before excited branch:
/// emits configurations in lexicographic string order directly.
fn collect_allowed(masks: &[u64], n: usize, i: usize, set: u64, out: &mut Vec<u64>) {
    if i == n {
        out.push(set);
        return;
    }
    collect_allowed(masks, n, i + 1, set, out);
    if masks[i] & set == 0 {
        collect_allowed(masks, n, i + 1, set | (1 << i), out);
    }
}

#[cfg(test)]
pub(crate) fn brute_force_allowed(edges: &[(usize, usize)], n: usize) -> Vec<u64> {
    let mut out = Vec::new();
    'outer: for c in 0..(1u64 << n) {
        for &(i, j) in edges {
            if c & (1 << i) != 0 && c & (1 << j) != 0 {
                continue 'outer;
            }
        }
        out.push(c);
    }
    out
}
