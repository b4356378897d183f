//! Lattice geometry, dual-species atom arrays and the blockade audit.
//!
//! Data atoms sit on the vertices of a chain, square or honeycomb lattice;
//! each lattice bond is subdivided by a gadget of `S` ancilla atoms that
//! mediates the interaction between its two endpoints. All coordinates are
//! expressed in units of the data-ancilla spacing `d`, so the data-data bond
//! length is 2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bond orientation class. Chains use `X` only; square lattices `X`/`Y`;
/// honeycomb and hexagon patches `X`/`Y`/`Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondClass {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Supported lattice families. `Hexagon` is a single honeycomb plaquette
/// (6 sites); its `extent` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeFamily {
    Chain,
    Square,
    Honeycomb,
    Hexagon,
}

/// Declarative description of a data-atom lattice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub family: LatticeFamily,
    pub extent: Vec<usize>,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn chain(len: usize, boundary: Boundary) -> Self {
        LatticeSpec {
            family: LatticeFamily::Chain,
            extent: vec![len],
            boundary,
        }
    }

    pub fn square(nx: usize, ny: usize, boundary: Boundary) -> Self {
        LatticeSpec {
            family: LatticeFamily::Square,
            extent: vec![nx, ny],
            boundary,
        }
    }

    /// Honeycomb patch of `nx * ny` unit cells, two sites per cell.
    pub fn honeycomb(nx: usize, ny: usize, boundary: Boundary) -> Self {
        LatticeSpec {
            family: LatticeFamily::Honeycomb,
            extent: vec![nx, ny],
            boundary,
        }
    }

    pub fn hexagon() -> Self {
        LatticeSpec {
            family: LatticeFamily::Hexagon,
            extent: vec![],
            boundary: Boundary::Open,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |n: usize| -> Result<()> {
            if self.extent.len() != n {
                return Err(Error::geometry(format!(
                    "{:?} lattice needs {} extent value(s), got {}",
                    self.family,
                    n,
                    self.extent.len()
                )));
            }
            Ok(())
        };
        let min_extent = match self.boundary {
            Boundary::Open => 2,
            // Wrapping an extent of 1 or 2 would create self-loops or doubled
            // bonds between the same atom pair.
            Boundary::Periodic => 3,
        };
        match self.family {
            LatticeFamily::Chain => {
                need(1)?;
                if self.extent[0] < min_extent {
                    return Err(Error::geometry(format!(
                        "chain extent {} below minimum {min_extent} for {:?} boundary",
                        self.extent[0], self.boundary
                    )));
                }
            }
            LatticeFamily::Square | LatticeFamily::Honeycomb => {
                need(2)?;
                let min = if self.family == LatticeFamily::Honeycomb
                    && self.boundary == Boundary::Open
                {
                    // A single open row of cells is a valid (dangling) patch.
                    1
                } else {
                    min_extent
                };
                for &e in &self.extent {
                    if e < min {
                        return Err(Error::geometry(format!(
                            "{:?} extent {e} below minimum {min} for {:?} boundary",
                            self.family, self.boundary
                        )));
                    }
                }
            }
            LatticeFamily::Hexagon => {
                if self.boundary != Boundary::Open {
                    return Err(Error::geometry("hexagon patch cannot be periodic"));
                }
            }
        }
        Ok(())
    }

    /// Bond classes present in this family.
    pub fn classes(&self) -> &'static [BondClass] {
        match self.family {
            LatticeFamily::Chain => &[BondClass::X],
            LatticeFamily::Square => &[BondClass::X, BondClass::Y],
            LatticeFamily::Honeycomb | LatticeFamily::Hexagon => {
                &[BondClass::X, BondClass::Y, BondClass::Z]
            }
        }
    }

    /// Realize the data-atom graph with positions.
    pub fn build(&self) -> Result<Lattice> {
        self.validate()?;
        let wrap = self.boundary == Boundary::Periodic;
        let mut sites = Vec::new();
        let mut bonds = Vec::new();
        let mut vectors = Vec::new();
        match self.family {
            LatticeFamily::Chain => {
                let l = self.extent[0];
                for i in 0..l {
                    sites.push([2.0 * i as f64, 0.0]);
                }
                for i in 0..l.saturating_sub(1) {
                    bonds.push(Bond::new(i, i + 1, BondClass::X));
                }
                if wrap {
                    bonds.push(Bond::new(l - 1, 0, BondClass::X));
                    vectors.push([2.0 * l as f64, 0.0]);
                }
            }
            LatticeFamily::Square => {
                let (nx, ny) = (self.extent[0], self.extent[1]);
                let idx = |i: usize, j: usize| i + nx * j;
                for j in 0..ny {
                    for i in 0..nx {
                        let _ = idx(i, j);
                        sites.push([2.0 * i as f64, 2.0 * j as f64]);
                    }
                }
                for j in 0..ny {
                    for i in 0..nx {
                        if i + 1 < nx {
                            bonds.push(Bond::new(idx(i, j), idx(i + 1, j), BondClass::X));
                        } else if wrap {
                            bonds.push(Bond::new(idx(i, j), idx(0, j), BondClass::X));
                        }
                        if j + 1 < ny {
                            bonds.push(Bond::new(idx(i, j), idx(i, j + 1), BondClass::Y));
                        } else if wrap {
                            bonds.push(Bond::new(idx(i, j), idx(i, 0), BondClass::Y));
                        }
                    }
                }
                if wrap {
                    vectors.push([2.0 * nx as f64, 0.0]);
                    vectors.push([0.0, 2.0 * ny as f64]);
                }
            }
            LatticeFamily::Honeycomb => {
                let (nx, ny) = (self.extent[0], self.extent[1]);
                // Bond length 2; nearest-neighbor displacements from an A site.
                let dz = [0.0, 2.0];
                let sq3 = 3.0f64.sqrt();
                let a1 = [sq3, 3.0]; // dz - dx
                let a2 = [-sq3, 3.0]; // dz - dy
                let a_site = |i: usize, j: usize| 2 * (i + nx * j);
                for j in 0..ny {
                    for i in 0..nx {
                        let r = [
                            i as f64 * a1[0] + j as f64 * a2[0],
                            i as f64 * a1[1] + j as f64 * a2[1],
                        ];
                        sites.push(r);
                        sites.push([r[0] + dz[0], r[1] + dz[1]]);
                    }
                }
                for j in 0..ny {
                    for i in 0..nx {
                        let a = a_site(i, j);
                        bonds.push(Bond::new(a, a + 1, BondClass::Z));
                        if i >= 1 {
                            bonds.push(Bond::new(a, a_site(i - 1, j) + 1, BondClass::X));
                        } else if wrap {
                            bonds.push(Bond::new(a, a_site(nx - 1, j) + 1, BondClass::X));
                        }
                        if j >= 1 {
                            bonds.push(Bond::new(a, a_site(i, j - 1) + 1, BondClass::Y));
                        } else if wrap {
                            bonds.push(Bond::new(a, a_site(i, ny - 1) + 1, BondClass::Y));
                        }
                    }
                }
                if wrap {
                    vectors.push([nx as f64 * a1[0], nx as f64 * a1[1]]);
                    vectors.push([ny as f64 * a2[0], ny as f64 * a2[1]]);
                }
            }
            LatticeFamily::Hexagon => {
                use std::f64::consts::PI;
                for k in 0..6 {
                    let ang = PI / 3.0 * k as f64;
                    sites.push([2.0 * ang.cos(), 2.0 * ang.sin()]);
                }
                // Class pattern of a plaquette cut from the honeycomb lattice.
                let classes = [
                    BondClass::X,
                    BondClass::Z,
                    BondClass::Y,
                    BondClass::X,
                    BondClass::Z,
                    BondClass::Y,
                ];
                for k in 0..6 {
                    bonds.push(Bond::new(k, (k + 1) % 6, classes[k]));
                }
            }
        }
        Ok(Lattice {
            spec: self.clone(),
            sites,
            bonds,
            periodic_vectors: vectors,
        })
    }
}

/// A lattice bond between data sites `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub class: BondClass,
}

impl Bond {
    fn new(a: usize, b: usize, class: BondClass) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Bond { a, b, class }
    }
}

/// Realized data-atom graph: site positions, classed bonds and (for periodic
/// boundaries) the translation vectors used for minimal-image distances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    pub spec: LatticeSpec,
    pub sites: Vec<[f64; 2]>,
    pub bonds: Vec<Bond>,
    pub periodic_vectors: Vec<[f64; 2]>,
}

impl Lattice {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Number of bonds incident to `site`.
    pub fn degree(&self, site: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == site || b.b == site).count()
    }

    /// Number of bonds of `class` incident to `site`.
    pub fn degree_of_class(&self, site: usize, class: BondClass) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.class == class && (b.a == site || b.b == site))
            .count()
    }

    /// Graph distance between two sites (breadth-first search).
    pub fn graph_distance(&self, from: usize, to: usize) -> Option<usize> {
        let n = self.n_sites();
        let mut adj = vec![Vec::new(); n];
        for b in &self.bonds {
            adj[b.a].push(b.b);
            adj[b.b].push(b.a);
        }
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            if v == to {
                return Some(dist[v]);
            }
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

/// Assignment of gadget sizes to bonds: a uniform default and/or a size per
/// bond class, with optional per-bond overrides (keyed by bond index in the
/// realized lattice). Resolution order: per-bond, per-class, uniform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GadgetAssignment {
    #[serde(default)]
    pub uniform: Option<usize>,
    #[serde(default)]
    pub per_class: BTreeMap<BondClass, usize>,
    #[serde(default)]
    pub per_bond: BTreeMap<usize, usize>,
    #[serde(default = "default_s_max")]
    pub s_max: usize,
}

pub const DEFAULT_S_MAX: usize = 3;

fn default_s_max() -> usize {
    DEFAULT_S_MAX
}

impl GadgetAssignment {
    pub fn uniform(s: usize) -> Self {
        GadgetAssignment {
            uniform: Some(s),
            per_class: BTreeMap::new(),
            per_bond: BTreeMap::new(),
            s_max: DEFAULT_S_MAX,
        }
    }

    pub fn per_class(pairs: &[(BondClass, usize)]) -> Self {
        GadgetAssignment {
            uniform: None,
            per_class: pairs.iter().cloned().collect(),
            per_bond: BTreeMap::new(),
            s_max: DEFAULT_S_MAX,
        }
    }

    pub fn with_s_max(mut self, s_max: usize) -> Self {
        self.s_max = s_max;
        self
    }

    fn validate(&self, lattice: &Lattice) -> Result<()> {
        let classes = lattice.spec.classes();
        if let Some(s) = self.uniform {
            self.check_size(s)?;
        }
        for (class, s) in &self.per_class {
            if !classes.contains(class) {
                return Err(Error::config(format!(
                    "gadget size given for bond class {class:?} absent from {:?} lattice",
                    lattice.spec.family
                )));
            }
            self.check_size(*s)?;
        }
        for (bond, s) in &self.per_bond {
            if *bond >= lattice.bonds.len() {
                return Err(Error::config(format!(
                    "per-bond gadget override {bond} out of range ({} bonds)",
                    lattice.bonds.len()
                )));
            }
            self.check_size(*s)?;
        }
        for (i, b) in lattice.bonds.iter().enumerate() {
            if !self.per_bond.contains_key(&i)
                && !self.per_class.contains_key(&b.class)
                && self.uniform.is_none()
            {
                return Err(Error::config(format!(
                    "no gadget size for bond {i} of class {:?}",
                    b.class
                )));
            }
        }
        Ok(())
    }

    fn check_size(&self, s: usize) -> Result<()> {
        if s < 1 || s > self.s_max {
            return Err(Error::config(format!(
                "gadget size {s} outside 1..={}",
                self.s_max
            )));
        }
        Ok(())
    }

    pub fn size_for(&self, bond_index: usize, class: BondClass) -> usize {
        self.per_bond
            .get(&bond_index)
            .or_else(|| self.per_class.get(&class))
            .copied()
            .or(self.uniform)
            .expect("assignment validated against lattice")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Data,
    Ancilla,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub id: usize,
    pub pos: [f64; 2],
    pub species: Species,
    /// Bond index of the owning gadget; `None` for data atoms.
    pub gadget: Option<usize>,
}

/// Physical array: data atoms on lattice sites, ancilla gadgets on bonds, and
/// the declared blockade graph. Blockade edges are part of the construction,
/// not derived from distances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomArray {
    pub atoms: Vec<Atom>,
    /// Sorted, deduplicated pairs `(i, j)` with `i < j`.
    pub blockade_edges: Vec<(usize, usize)>,
    pub lattice: Lattice,
    /// Atom ids of the ancillas belonging to each bond, in bond order.
    pub gadget_atoms: Vec<Vec<usize>>,
    pub n_data: usize,
}

/// Radius of the micro-circle on which the ancillas of a size `S >= 2` gadget
/// are arranged around the bond midpoint, in units of `d`.
pub const GADGET_RADIUS: f64 = 0.1;

/// Build the dual-species array for a lattice and gadget assignment.
pub fn build_array(spec: &LatticeSpec, assignment: &GadgetAssignment) -> Result<AtomArray> {
    let lattice = spec.build()?;
    assignment.validate(&lattice)?;

    let mut atoms: Vec<Atom> = lattice
        .sites
        .iter()
        .enumerate()
        .map(|(i, &pos)| Atom {
            id: i,
            pos,
            species: Species::Data,
            gadget: None,
        })
        .collect();
    let mut edges = Vec::new();
    let mut gadget_atoms = Vec::with_capacity(lattice.bonds.len());

    for (bi, bond) in lattice.bonds.iter().enumerate() {
        let s = assignment.size_for(bi, bond.class);
        let pa = lattice.sites[bond.a];
        let pb = lattice.sites[bond.b];
        // Midpoint along the minimal-image segment, so wrap bonds place their
        // gadget on the short arc.
        let delta = minimal_image_delta([pb[0] - pa[0], pb[1] - pa[1]], &lattice.periodic_vectors);
        let mid = [pa[0] + delta[0] / 2.0, pa[1] + delta[1] / 2.0];
        let mut ids = Vec::with_capacity(s);
        for k in 0..s {
            let pos = if s == 1 {
                mid
            } else {
                let ang = 2.0 * std::f64::consts::PI * k as f64 / s as f64;
                [
                    mid[0] + GADGET_RADIUS * ang.cos(),
                    mid[1] + GADGET_RADIUS * ang.sin(),
                ]
            };
            let id = atoms.len();
            atoms.push(Atom {
                id,
                pos,
                species: Species::Ancilla,
                gadget: Some(bi),
            });
            ids.push(id);
        }
        for &anc in &ids {
            edges.push(ordered(bond.a, anc));
            edges.push(ordered(bond.b, anc));
        }
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                edges.push(ordered(ids[i], ids[j]));
            }
        }
        gadget_atoms.push(ids);
    }

    edges.sort_unstable();
    edges.dedup();
    let array = AtomArray {
        n_data: lattice.sites.len(),
        atoms,
        blockade_edges: edges,
        lattice,
        gadget_atoms,
    };
    array.check_invariants()?;
    Ok(array)
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn minimal_image_delta(mut delta: [f64; 2], vectors: &[[f64; 2]]) -> [f64; 2] {
    if vectors.is_empty() {
        return delta;
    }
    // Extents are >= 3 cells, so scanning shifts of -1..=1 per vector finds
    // the minimal image.
    let mut best = delta;
    let mut best_len = delta[0] * delta[0] + delta[1] * delta[1];
    let shifts: Vec<i32> = vec![-1, 0, 1];
    match vectors.len() {
        1 => {
            for &s in &shifts {
                let cand = [
                    delta[0] + s as f64 * vectors[0][0],
                    delta[1] + s as f64 * vectors[0][1],
                ];
                let len = cand[0] * cand[0] + cand[1] * cand[1];
                if len < best_len {
                    best_len = len;
                    best = cand;
                }
            }
        }
        _ => {
            for &s0 in &shifts {
                for &s1 in &shifts {
                    let cand = [
                        delta[0] + s0 as f64 * vectors[0][0] + s1 as f64 * vectors[1][0],
                        delta[1] + s0 as f64 * vectors[0][1] + s1 as f64 * vectors[1][1],
                    ];
                    let len = cand[0] * cand[0] + cand[1] * cand[1];
                    if len < best_len {
                        best_len = len;
                        best = cand;
                    }
                }
            }
        }
    }
    delta = best;
    delta
}

impl AtomArray {
    /// Single-species reference chain: `n` atoms with unit spacing and
    /// nearest-neighbor blockade edges. This fixture models established
    /// one-species realizations of the constrained-dynamics chain for audit
    /// comparison; it deliberately bypasses the dual-species build invariants
    /// (all atoms are data atoms and blockade each other).
    pub fn single_species_chain(n: usize) -> Result<AtomArray> {
        if n < 3 {
            return Err(Error::geometry("reference chain needs at least 3 atoms"));
        }
        let atoms: Vec<Atom> = (0..n)
            .map(|i| Atom {
                id: i,
                pos: [i as f64, 0.0],
                species: Species::Data,
                gadget: None,
            })
            .collect();
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Ok(AtomArray {
            atoms,
            blockade_edges: edges,
            lattice: Lattice {
                spec: LatticeSpec::chain(n, Boundary::Open),
                sites: (0..n).map(|i| [i as f64, 0.0]).collect(),
                bonds: (0..n - 1).map(|i| Bond::new(i, i + 1, BondClass::X)).collect(),
                periodic_vectors: Vec::new(),
            },
            gadget_atoms: Vec::new(),
            n_data: n,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Minimal-image distance between two atoms.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.atoms[i].pos;
        let b = self.atoms[j].pos;
        let d = minimal_image_delta(
            [b[0] - a[0], b[1] - a[1]],
            &self.lattice.periodic_vectors,
        );
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.blockade_edges.binary_search(&ordered(i, j)).is_ok()
    }

    /// Neighbor bitmasks over atom indices, for constrained-basis enumeration.
    /// Errors if the array exceeds 64 atoms.
    pub fn blockade_masks(&self) -> Result<Vec<u64>> {
        let n = self.n_atoms();
        if n > 64 {
            return Err(Error::Resource {
                what: "blockade bitmask atoms".into(),
                required: n,
                cap: 64,
            });
        }
        let mut masks = vec![0u64; n];
        for &(i, j) in &self.blockade_edges {
            masks[i] |= 1 << j;
            masks[j] |= 1 << i;
        }
        Ok(masks)
    }

    /// Atom ids of one species.
    pub fn species_atoms(&self, species: Species) -> Vec<usize> {
        self.atoms
            .iter()
            .filter(|a| a.species == species)
            .map(|a| a.id)
            .collect()
    }

    fn check_invariants(&self) -> Result<()> {
        for &(i, j) in &self.blockade_edges {
            if self.atoms[i].species == Species::Data && self.atoms[j].species == Species::Data {
                return Err(Error::geometry(format!(
                    "data atoms {i} and {j} share a blockade edge"
                )));
            }
        }
        for atom in &self.atoms {
            match atom.species {
                Species::Data => {
                    if atom.gadget.is_some() {
                        return Err(Error::geometry(format!(
                            "data atom {} carries a gadget id",
                            atom.id
                        )));
                    }
                }
                Species::Ancilla => {
                    if atom.gadget.is_none() {
                        return Err(Error::geometry(format!(
                            "ancilla {} belongs to no gadget",
                            atom.id
                        )));
                    }
                }
            }
        }
        // Each gadget's induced blockade subgraph is the complete graph on
        // its 2 + S atoms minus the endpoint-endpoint edge.
        for (bi, ids) in self.gadget_atoms.iter().enumerate() {
            let bond = self.lattice.bonds[bi];
            let mut members = vec![bond.a, bond.b];
            members.extend_from_slice(ids);
            let mut count = 0usize;
            for x in 0..members.len() {
                for y in x + 1..members.len() {
                    if self.has_edge(members[x], members[y]) {
                        count += 1;
                    }
                }
            }
            let m = members.len();
            let expect = m * (m - 1) / 2 - 1;
            if count != expect {
                return Err(Error::geometry(format!(
                    "gadget {bi} has {count} internal edges, expected {expect}"
                )));
            }
            if self.has_edge(bond.a, bond.b) {
                return Err(Error::geometry(format!(
                    "gadget {bi} endpoints are directly blockaded"
                )));
            }
        }
        Ok(())
    }

    /// JSON export: atom records plus the blockade edge list.
    pub fn export_json(&self) -> serde_json::Value {
        serde_json::json!({
            "atoms": self.atoms.iter().map(|a| serde_json::json!({
                "id": a.id,
                "x": a.pos[0],
                "y": a.pos[1],
                "species": a.species,
                "gadget": a.gadget,
            })).collect::<Vec<_>>(),
            "edges": self.blockade_edges.iter().map(|&(i, j)| vec![i, j]).collect::<Vec<_>>(),
        })
    }
}

/// How non-edge pairs are classified as unwanted in the audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditMode {
    /// Only inter-species pairs count (intra-species interactions are assumed
    /// negligible). Selected automatically for dual-species arrays.
    InterSpecies,
    /// Every non-edge pair counts. Selected for single-species arrays.
    AllPairs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstPair {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    /// Interaction strength relative to a blockade pair at the blockade
    /// shell: `(d_blockade / d)^exponent`.
    pub relative_strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomCoordination {
    pub atom: usize,
    pub blockade_degree: usize,
    /// Unwanted partners at the dominant (nearest unwanted) shell.
    pub dominant_unwanted: usize,
}

/// Quantitative check of the blockade approximation for an array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockadeAudit {
    pub exponent: f64,
    pub mode: AuditMode,
    /// Dominant-shell closed form: bulk count ratio times
    /// `(d_blockade / d_unwanted)^exponent`. Zero when no unwanted pair exists.
    pub ratio_unwanted_over_blockade: f64,
    /// Exact all-pairs ratio of summed `d^-exponent` tails.
    pub all_pairs_ratio: f64,
    pub blockade_shell: f64,
    pub unwanted_shell: Option<f64>,
    pub worst_pair: Option<WorstPair>,
    pub per_atom: Vec<AtomCoordination>,
}

const SHELL_REL_TOL: f64 = 1e-6;

/// Audit the interaction tails of an array with the given power-law exponent.
pub fn blockade_audit(array: &AtomArray, exponent: f64) -> Result<BlockadeAudit> {
    if !(exponent > 0.0) || !exponent.is_finite() {
        return Err(Error::config(format!(
            "audit exponent must be positive and finite, got {exponent}"
        )));
    }
    if array.blockade_edges.is_empty() {
        return Err(Error::domain("array has no blockade edges to audit"));
    }
    let n = array.n_atoms();
    let both = array.atoms.iter().any(|a| a.species == Species::Data)
        && array.atoms.iter().any(|a| a.species == Species::Ancilla);
    let mode = if both {
        AuditMode::InterSpecies
    } else {
        AuditMode::AllPairs
    };

    let mut blockade_pairs: Vec<(usize, usize, f64)> = Vec::new();
    for &(i, j) in &array.blockade_edges {
        blockade_pairs.push((i, j, array.distance(i, j)));
    }
    let d_blockade = blockade_pairs
        .iter()
        .map(|p| p.2)
        .fold(f64::INFINITY, f64::min);

    let mut unwanted: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if array.has_edge(i, j) {
                continue;
            }
            if mode == AuditMode::InterSpecies
                && array.atoms[i].species == array.atoms[j].species
            {
                continue;
            }
            unwanted.push((i, j, array.distance(i, j)));
        }
    }

    let d_unwanted = unwanted.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let at_shell = |d: f64, shell: f64| (d - shell).abs() <= SHELL_REL_TOL * shell;

    let mut per_atom: Vec<AtomCoordination> = (0..n)
        .map(|atom| AtomCoordination {
            atom,
            blockade_degree: 0,
            dominant_unwanted: 0,
        })
        .collect();
    let mut blockade_shell_count = vec![0usize; n];
    for &(i, j, d) in &blockade_pairs {
        per_atom[i].blockade_degree += 1;
        per_atom[j].blockade_degree += 1;
        if at_shell(d, d_blockade) {
            blockade_shell_count[i] += 1;
            blockade_shell_count[j] += 1;
        }
    }
    for &(i, j, d) in &unwanted {
        if d_unwanted.is_finite() && at_shell(d, d_unwanted) {
            per_atom[i].dominant_unwanted += 1;
            per_atom[j].dominant_unwanted += 1;
        }
    }

    let (dominant_ratio, worst_pair) = if unwanted.is_empty() {
        (0.0, None)
    } else {
        // Bulk coordination: maximum per-atom shell counts.
        let n_u = per_atom.iter().map(|c| c.dominant_unwanted).max().unwrap_or(0);
        let n_b = blockade_shell_count.iter().copied().max().unwrap_or(1).max(1);
        let ratio =
            (n_u as f64 / n_b as f64) * (d_blockade / d_unwanted).powf(exponent);
        let worst = unwanted
            .iter()
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|&(i, j, d)| WorstPair {
                i,
                j,
                distance: d,
                relative_strength: (d_blockade / d).powf(exponent),
            });
        (ratio, worst)
    };

    let sum_unwanted: f64 = unwanted.iter().map(|p| p.2.powf(-exponent)).sum();
    let sum_blockade: f64 = blockade_pairs.iter().map(|p| p.2.powf(-exponent)).sum();

    Ok(BlockadeAudit {
        exponent,
        mode,
        ratio_unwanted_over_blockade: dominant_ratio,
        all_pairs_ratio: sum_unwanted / sum_blockade,
        blockade_shell: d_blockade,
        unwanted_shell: if unwanted.is_empty() {
            None
        } else {
            Some(d_unwanted)
        },
        worst_pair,
        per_atom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_counts_open_and_periodic() {
        let open = build_array(
            &LatticeSpec::chain(5, Boundary::Open),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        assert_eq!(open.lattice.bonds.len(), 4);
        assert_eq!(open.n_atoms(), 5 + 4);

        let per = build_array(
            &LatticeSpec::chain(5, Boundary::Periodic),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        assert_eq!(per.lattice.bonds.len(), 5);
        assert_eq!(per.n_atoms(), 10);
    }

    #[test]
    fn periodic_needs_extent_three() {
        let err = LatticeSpec::chain(2, Boundary::Periodic).validate();
        assert!(matches!(err, Err(Error::Geometry(_))));
        assert!(LatticeSpec::chain(2, Boundary::Open).validate().is_ok());
        let err = LatticeSpec::square(2, 3, Boundary::Periodic).validate();
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    #[test]
    fn square_two_by_two_matches_expected_counts() {
        let arr = build_array(
            &LatticeSpec::square(2, 2, Boundary::Open),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        assert_eq!(arr.n_data, 4);
        assert_eq!(arr.lattice.bonds.len(), 4);
        assert_eq!(arr.n_atoms(), 8);
        assert_eq!(arr.blockade_edges.len(), 8);
    }

    #[test]
    fn honeycomb_cell_counts_with_mixed_sizes() {
        let assignment = GadgetAssignment::per_class(&[
            (BondClass::Z, 1),
            (BondClass::Y, 2),
            (BondClass::X, 3),
        ]);
        let arr = build_array(&LatticeSpec::honeycomb(3, 3, Boundary::Periodic), &assignment)
            .unwrap();
        assert_eq!(arr.n_data, 18);
        // Per cell: one bond of each class.
        assert_eq!(arr.lattice.bonds.len(), 27);
        assert_eq!(arr.n_atoms(), 18 + 9 * (1 + 2 + 3));
        // Every data atom has one bond per class.
        for site in 0..arr.n_data {
            for c in [BondClass::X, BondClass::Y, BondClass::Z] {
                assert_eq!(arr.lattice.degree_of_class(site, c), 1);
            }
        }
    }

    #[test]
    fn honeycomb_bond_lengths_are_uniform() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let lat = LatticeSpec::honeycomb(3, 3, boundary).build().unwrap();
            for b in &lat.bonds {
                let pa = lat.sites[b.a];
                let pb = lat.sites[b.b];
                let d = minimal_image_delta(
                    [pb[0] - pa[0], pb[1] - pa[1]],
                    &lat.periodic_vectors,
                );
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                assert!((len - 2.0).abs() < 1e-12, "bond length {len}");
            }
        }
    }

    #[test]
    fn hexagon_is_a_six_ring_with_doubled_classes() {
        let arr = build_array(&LatticeSpec::hexagon(), &GadgetAssignment::uniform(1)).unwrap();
        assert_eq!(arr.n_data, 6);
        assert_eq!(arr.lattice.bonds.len(), 6);
        for c in [BondClass::X, BondClass::Y, BondClass::Z] {
            let count = arr.lattice.bonds.iter().filter(|b| b.class == c).count();
            assert_eq!(count, 2);
            // Bonds of one class are disjoint.
            let members: Vec<usize> = arr
                .lattice
                .bonds
                .iter()
                .filter(|b| b.class == c)
                .flat_map(|b| [b.a, b.b])
                .collect();
            let mut dedup = members.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), members.len());
        }
        for site in 0..6 {
            assert_eq!(arr.lattice.degree(site), 2);
        }
    }

    #[test]
    fn no_data_data_edges_anywhere() {
        let arrays = vec![
            build_array(
                &LatticeSpec::chain(6, Boundary::Periodic),
                &GadgetAssignment::uniform(2),
            )
            .unwrap(),
            build_array(
                &LatticeSpec::square(3, 3, Boundary::Periodic),
                &GadgetAssignment::per_class(&[(BondClass::X, 1), (BondClass::Y, 2)]),
            )
            .unwrap(),
            build_array(&LatticeSpec::hexagon(), &GadgetAssignment::uniform(3)).unwrap(),
        ];
        for arr in arrays {
            for &(i, j) in &arr.blockade_edges {
                assert!(
                    arr.atoms[i].species != Species::Data
                        || arr.atoms[j].species != Species::Data
                );
            }
        }
    }

    #[test]
    fn gadget_subgraph_complete_minus_endpoint_edge() {
        // Exercised inside build; spot-check a size-3 gadget explicitly.
        let arr = build_array(
            &LatticeSpec::chain(2, Boundary::Open),
            &GadgetAssignment::uniform(3),
        )
        .unwrap();
        assert_eq!(arr.n_atoms(), 5);
        // C(5,2) - 1 = 9 edges.
        assert_eq!(arr.blockade_edges.len(), 9);
        assert!(!arr.has_edge(0, 1));
    }

    #[test]
    fn size_one_ancilla_sits_at_midpoint() {
        let arr = build_array(
            &LatticeSpec::chain(2, Boundary::Open),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        let anc = &arr.atoms[2];
        assert!((anc.pos[0] - 1.0).abs() < 1e-15);
        assert!((anc.pos[1] - 0.0).abs() < 1e-15);
        assert!((arr.distance(0, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn audit_honeycomb_matches_shell_closed_form() {
        let arr = build_array(
            &LatticeSpec::honeycomb(3, 3, Boundary::Periodic),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        let audit = blockade_audit(&arr, 6.0).unwrap();
        let expect = 2.0 / 343.0; // (6/3) * 7^{-3}
        assert!(
            (audit.ratio_unwanted_over_blockade - expect).abs() < 1e-12,
            "got {}",
            audit.ratio_unwanted_over_blockade
        );
        assert_eq!(audit.mode, AuditMode::InterSpecies);
        let shell = audit.unwanted_shell.unwrap();
        assert!((shell - 7.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn audit_single_species_chain_reference() {
        let arr = AtomArray::single_species_chain(12).unwrap();
        let audit = blockade_audit(&arr, 6.0).unwrap();
        assert_eq!(audit.mode, AuditMode::AllPairs);
        assert!((audit.ratio_unwanted_over_blockade - 1.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn audit_two_atom_gadget_has_no_unwanted_pairs() {
        let arr = build_array(
            &LatticeSpec::chain(2, Boundary::Open),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        let audit = blockade_audit(&arr, 6.0).unwrap();
        assert_eq!(audit.ratio_unwanted_over_blockade, 0.0);
        assert!(audit.worst_pair.is_none());
    }

    #[test]
    fn audit_monotone_decreasing_in_exponent() {
        let arrays = vec![
            build_array(
                &LatticeSpec::honeycomb(3, 3, Boundary::Periodic),
                &GadgetAssignment::uniform(1),
            )
            .unwrap(),
            AtomArray::single_species_chain(10).unwrap(),
            build_array(
                &LatticeSpec::square(3, 3, Boundary::Periodic),
                &GadgetAssignment::uniform(2),
            )
            .unwrap(),
        ];
        for arr in arrays {
            let mut last_dom = f64::INFINITY;
            let mut last_all = f64::INFINITY;
            for e in 3..=8 {
                let audit = blockade_audit(&arr, e as f64).unwrap();
                assert!(audit.ratio_unwanted_over_blockade < last_dom);
                assert!(audit.all_pairs_ratio < last_all);
                last_dom = audit.ratio_unwanted_over_blockade;
                last_all = audit.all_pairs_ratio;
            }
        }
    }

    #[test]
    fn export_json_shape() {
        let arr = build_array(
            &LatticeSpec::chain(3, Boundary::Open),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        let v = arr.export_json();
        assert_eq!(v["atoms"].as_array().unwrap().len(), 5);
        assert_eq!(v["edges"].as_array().unwrap().len(), 4);
        assert_eq!(v["atoms"][0]["species"], "data");
    }

    #[test]
    fn wrap_bond_gadget_sits_on_short_arc() {
        let arr = build_array(
            &LatticeSpec::chain(4, Boundary::Periodic),
            &GadgetAssignment::uniform(1),
        )
        .unwrap();
        // Wrap bond connects sites 3 (x=6) and 0 (x=0); minimal image midpoint
        // is at x = 7 == -1 (mod 8).
        let anc = arr.gadget_atoms[3][0];
        let d0 = arr.distance(0, anc);
        let d3 = arr.distance(3, anc);
        assert!((d0 - 1.0).abs() < 1e-12);
        assert!((d3 - 1.0).abs() < 1e-12);
    }
}
