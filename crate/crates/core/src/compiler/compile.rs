//! Lowering the sub-step schedule to a pulse program on the atom array.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::control::{
    cz_pulse_params, grape_optimize, CzPulseParams, GrapeProblem, FEASIBILITY_SLACK,
};
use crate::error::{Error, Result};
use crate::lattice::{build_array, AtomArray, BondClass, Species};
use crate::linalg::C64;
use crate::pxp::{ExactSingles, PhaseSchedule, PulseProgram, PulseSegment, Segment};

use super::circuit::{ideal_circuit, GateCircuit};
use super::model::QcaModel;
use super::plan::{gadget_assignment, step_plan, SubStep};

/// Phases within this distance of a multiple of 2 pi are treated as
/// identity targets and skipped.
const NULL_PHASE_TOL: f64 = 1e-9;
/// Single-qubit layers closer to identity than this are dropped.
const IDENTITY_TOL: f64 = 1e-12;
/// Physical singles require site unitaries to agree within this bound.
const UNIFORMITY_TOL: f64 = 1e-10;

/// How single-qubit layers are realized on hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinglesMode {
    /// Per-site exact 2x2 unitaries; the verification default.
    Exact,
    /// One global resonant or detuned drive on the data species; requires
    /// the layer to be site-independent.
    Physical,
}

/// Mediated-pulse synthesis settings for decorated (multi-size) arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSynthesisOptions {
    /// Pulse duration; default is 12 * (number of sizes) / rabi.
    pub total_time: Option<f64>,
    pub steps: usize,
    pub threshold: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for GrapeSynthesisOptions {
    fn default() -> Self {
        GrapeSynthesisOptions {
            total_time: None,
            steps: crate::control::DEFAULT_STEPS,
            threshold: crate::control::DEFAULT_THRESHOLD,
            seed: 11,
            restarts: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileOptions {
    pub singles_mode: SinglesMode,
    /// Use the bulk bond count of each class for every site's z-correction
    /// instead of its actual one. Exact only on boundary-free geometries.
    pub uniform_degree: bool,
    pub rabi: f64,
    pub grape: GrapeSynthesisOptions,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            singles_mode: SinglesMode::Exact,
            uniform_degree: false,
            rabi: 1.0,
            grape: GrapeSynthesisOptions::default(),
        }
    }
}

/// How one mediated pulse was obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseRecipe {
    /// Closed-form detuning ramp for a single superatom size.
    ClosedForm(CzPulseParams),
    /// Numerically optimized phase profile over several sizes.
    Synthesized {
        sizes: Vec<usize>,
        targets: Vec<f64>,
        xi: Vec<f64>,
        dt: f64,
        total_time: f64,
        error: f64,
    },
}

/// One chronological piece of a step, prior to singles-mode rendering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPiece {
    /// Per-site single-qubit unitaries on the data register.
    Singles { unitaries: Vec<Array2<C64>> },
    /// A mediated ancilla pulse; indexes into the recipe list.
    Pulse { segment: PulseSegment, recipe: usize },
}

/// Everything the compiler produced for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompilationReport {
    pub model: QcaModel,
    pub circuit: GateCircuit,
    pub array: AtomArray,
    /// Superatom size per bond class.
    pub gadget_sizes: BTreeMap<BondClass, usize>,
    /// Chronological pieces of one step, seam-mergeable across repetitions.
    pub step_pieces: Vec<StepPiece>,
    pub recipes: Vec<PulseRecipe>,
    pub singles_mode: SinglesMode,
    pub rabi: f64,
    /// The rendered single-step program.
    pub program: PulseProgram,
    /// Steady-state segment count per repeated step.
    pub segments_per_step: usize,
    /// Mediated pulses per step: 1 for synchronous variants, 3 otherwise.
    pub ancilla_pulses_per_step: usize,
    /// Worst-case verified fidelity, if verification was run.
    pub fidelity: Option<f64>,
}

impl CompilationReport {
    /// The pulse program for `repetitions` applications of the step, with
    /// single-qubit layers merged across step seams. Zero repetitions give
    /// an empty program.
    pub fn program_for(&self, repetitions: usize) -> Result<PulseProgram> {
        let mut pieces: Vec<StepPiece> = Vec::new();
        for _ in 0..repetitions {
            pieces.extend(self.step_pieces.iter().cloned());
        }
        let merged = merge_singles(pieces);
        render_program(&merged, self.singles_mode, self.rabi)
    }
}

/// Multiplies runs of adjacent singles layers into one and drops identity
/// layers.
fn merge_singles(pieces: Vec<StepPiece>) -> Vec<StepPiece> {
    let mut out: Vec<StepPiece> = Vec::new();
    for piece in pieces {
        match piece {
            StepPiece::Singles { unitaries } => {
                if let Some(StepPiece::Singles { unitaries: prev }) = out.last_mut() {
                    for (acc, u) in prev.iter_mut().zip(unitaries.iter()) {
                        *acc = u.dot(acc);
                    }
                } else {
                    out.push(StepPiece::Singles { unitaries });
                }
            }
            pulse => out.push(pulse),
        }
        // Drop a singles run once it has collapsed to identity.
        if let Some(StepPiece::Singles { unitaries }) = out.last() {
            if is_identity(unitaries) {
                out.pop();
            }
        }
    }
    out
}

fn is_identity(unitaries: &[Array2<C64>]) -> bool {
    unitaries.iter().all(|u| {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((u[[i, j]] - C64::new(expect, 0.0)).norm());
            }
        }
        worst < IDENTITY_TOL
    })
}

fn distance_to_full_turn(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

/// Renders merged pieces into engine segments under the chosen singles mode.
fn render_program(
    pieces: &[StepPiece],
    mode: SinglesMode,
    rabi: f64,
) -> Result<PulseProgram> {
    let mut program = PulseProgram::default();
    for piece in pieces {
        match piece {
            StepPiece::Pulse { segment, .. } => program.push_drive(segment.clone()),
            StepPiece::Singles { unitaries } => match mode {
                SinglesMode::Exact => {
                    let ops = unitaries
                        .iter()
                        .enumerate()
                        .map(|(site, u)| (site, u.clone()))
                        .collect();
                    program.segments.push(Segment::Singles(ExactSingles { ops }));
                }
                SinglesMode::Physical => {
                    for seg in physical_singles(unitaries, rabi)? {
                        program.push_drive(seg);
                    }
                }
            },
        }
    }
    Ok(program)
}

/// One global data pulse (or a two-pulse composite for z rotations)
/// realizing a site-independent single-qubit layer, up to global phase.
fn physical_singles(unitaries: &[Array2<C64>], rabi: f64) -> Result<Vec<PulseSegment>> {
    let first = &unitaries[0];
    for (site, u) in unitaries.iter().enumerate().skip(1) {
        let diff = (u - first).mapv(|v| v.norm()).fold(0.0, |a: f64, &v| a.max(v));
        if diff > UNIFORMITY_TOL {
            return Err(Error::config(format!(
                "physical singles need a site-independent layer; site {site} \
                 deviates by {diff:.2e} (open boundaries make z-corrections \
                 site-dependent; use exact singles or a periodic lattice)"
            )));
        }
    }

    // u = e^{i gamma} (cos(theta/2) I - i sin(theta/2) n.sigma)
    let det = first[[0, 0]] * first[[1, 1]] - first[[0, 1]] * first[[1, 0]];
    let gamma = det.arg() / 2.0;
    let v = first.mapv(|x| x * C64::from_polar(1.0, -gamma));
    let cos_half = ((v[[0, 0]] + v[[1, 1]]) / 2.0).re.clamp(-1.0, 1.0);
    let sin_half = (1.0 - cos_half * cos_half).sqrt();

    if sin_half < 1e-9 {
        if cos_half > 0.0 {
            return Ok(vec![]);
        }
        // v = -I: a full turn around any in-plane axis.
        return Ok(two_pulse_z_composite(0.0, rabi));
    }

    let axis_component = |axis: usize| -> f64 {
        let s = crate::linalg::sigma(axis);
        let trace = s.row(0).dot(&v.column(0)) + s.row(1).dot(&v.column(1));
        (trace * C64::new(0.0, 1.0) / (2.0 * sin_half)).re
    };
    let (nx, ny, nz) = (axis_component(0), axis_component(1), axis_component(2));
    let theta = 2.0 * sin_half.atan2(cos_half);
    let in_plane = nx.hypot(ny);

    if in_plane < 1e-12 {
        // Pure z rotation, unreachable by a single resonant drive.
        let gamma_z = theta / 2.0 * nz.signum();
        return Ok(two_pulse_z_composite(gamma_z, rabi));
    }

    // Tilted axis: one detuned drive. A drive at phase xi and detuning
    // delta generates (rabi cos xi, -rabi sin xi, delta).sigma / 2 plus a
    // count term that only shifts the global phase.
    let scale = rabi / in_plane;
    let delta = scale * nz;
    let duration = theta / scale;
    let xi = (-ny).atan2(nx);
    Ok(vec![PulseSegment {
        species: Species::Data,
        rabi,
        phase: PhaseSchedule::Constant { value: xi },
        duration,
        detuning: delta,
        frozen: vec![],
    }])
}

/// Two resonant pi pulses realizing -exp(-i gamma sigma_z): the phase-0
/// pulse first, then one at phase -gamma, since
/// R_{xi}(pi) R_0(pi) = -exp(i xi sigma_z).
fn two_pulse_z_composite(gamma: f64, rabi: f64) -> Vec<PulseSegment> {
    let pi_pulse = |xi: f64| PulseSegment {
        species: Species::Data,
        rabi,
        phase: PhaseSchedule::Constant { value: xi },
        duration: PI / rabi,
        detuning: 0.0,
        frozen: vec![],
    };
    vec![pi_pulse(0.0), pi_pulse(-gamma)]
}

/// Builds the mediated pulse for one sub-step, reusing previously
/// synthesized recipes when the target set repeats.
struct PulseSynth<'a> {
    options: &'a CompileOptions,
    recipes: Vec<PulseRecipe>,
    cache: HashMap<(Vec<usize>, Vec<u64>), (PulseSegment, usize)>,
}

impl<'a> PulseSynth<'a> {
    fn new(options: &'a CompileOptions) -> Self {
        PulseSynth {
            options,
            recipes: Vec::new(),
            cache: HashMap::new(),
        }
    }

    /// `targets` maps superatom size to the branch phase it must acquire;
    /// sizes present on the array but absent here return with zero phase.
    fn pulse_for(&mut self, targets: &BTreeMap<usize, f64>) -> Result<Option<(PulseSegment, usize)>> {
        if targets.values().all(|&p| distance_to_full_turn(p) <= NULL_PHASE_TOL) {
            return Ok(None);
        }
        let sizes: Vec<usize> = targets.keys().copied().collect();
        let phases: Vec<f64> = targets
            .values()
            .map(|p| p.rem_euclid(2.0 * PI))
            .collect();
        let key = (
            sizes.clone(),
            phases.iter().map(|p| p.to_bits()).collect::<Vec<u64>>(),
        );
        if let Some((segment, recipe)) = self.cache.get(&key) {
            return Ok(Some((segment.clone(), *recipe)));
        }

        let rabi = self.options.rabi;
        let (segment, recipe) = if sizes.len() == 1 {
            let params = cz_pulse_params(phases[0], sizes[0], rabi)?;
            let segment = params.segment(vec![]);
            (segment, PulseRecipe::ClosedForm(params))
        } else {
            self.synthesize(&sizes, &phases)?
        };
        self.recipes.push(recipe);
        let index = self.recipes.len() - 1;
        self.cache.insert(key, (segment.clone(), index));
        Ok(Some((segment, index)))
    }

    fn synthesize(&self, sizes: &[usize], phases: &[f64]) -> Result<(PulseSegment, PulseRecipe)> {
        let opts = &self.options.grape;
        let rabi = self.options.rabi;
        let total_time = opts
            .total_time
            .unwrap_or(12.0 * sizes.len() as f64 / rabi);
        let mut problem = GrapeProblem::new(sizes.to_vec(), phases.to_vec(), rabi, total_time)?;
        problem.steps = opts.steps;
        problem.threshold = opts.threshold;
        problem.validate()?;
        let mut attempts: Vec<f64> = Vec::new();
        for attempt in 0..opts.restarts.max(1) {
            let result = grape_optimize(&problem, None, opts.seed.wrapping_add(attempt as u64))?;
            if result.error < FEASIBILITY_SLACK * opts.threshold {
                let dt = problem.dt();
                let segment = PulseSegment {
                    species: Species::Ancilla,
                    rabi,
                    phase: PhaseSchedule::PiecewiseConstant {
                        values: result.xi.clone(),
                        dt,
                    },
                    duration: total_time,
                    detuning: 0.0,
                    frozen: vec![],
                };
                let recipe = PulseRecipe::Synthesized {
                    sizes: sizes.to_vec(),
                    targets: phases.to_vec(),
                    xi: result.xi,
                    dt,
                    total_time,
                    error: result.error,
                };
                return Ok((segment, recipe));
            }
            attempts.push(result.error);
        }
        Err(Error::compilation(format!(
            "mediated pulse synthesis infeasible: sizes {sizes:?}, target phases \
             {phases:?}, duration {total_time}, threshold {:.1e}; best errors per \
             restart were {attempts:?} (try a longer total_time)",
            opts.threshold
        )))
    }
}

/// Compiles a model into an atom array, a gate circuit, and a pulse
/// program, without verifying it.
pub fn compile(model: &QcaModel, options: &CompileOptions) -> Result<CompilationReport> {
    model.validate()?;
    if !(options.rabi.is_finite() && options.rabi > 0.0) {
        return Err(Error::config("compile rabi must be positive"));
    }
    let lattice = model.lattice.build()?;
    let assignment = gadget_assignment(model);
    let array = build_array(&model.lattice, &assignment)?;
    let circuit = ideal_circuit(model)?;
    let plan = step_plan(model, &lattice, options.uniform_degree)?;

    let mut gadget_sizes: BTreeMap<BondClass, usize> = BTreeMap::new();
    for (index, bond) in lattice.bonds.iter().enumerate() {
        gadget_sizes.insert(bond.class, assignment.size_for(index, bond.class));
    }
    // Sizes hosted on the array; every mediated pulse drives all of them.
    let all_sizes: Vec<usize> = {
        let mut s: Vec<usize> = lattice
            .bonds
            .iter()
            .enumerate()
            .map(|(i, b)| assignment.size_for(i, b.class))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    };

    let mut synth = PulseSynth::new(options);
    let mut step_pieces: Vec<StepPiece> = Vec::new();
    for SubStep {
        pre,
        bond_phases,
        post,
    } in plan
    {
        if let Some(unitaries) = pre {
            if !is_identity(&unitaries) {
                step_pieces.push(StepPiece::Singles { unitaries });
            }
        }
        if !bond_phases.is_empty() {
            let targets = size_targets(&lattice, &assignment, &all_sizes, &bond_phases)?;
            if let Some((segment, recipe)) = synth.pulse_for(&targets)? {
                step_pieces.push(StepPiece::Pulse { segment, recipe });
            }
        }
        if let Some(unitaries) = post {
            if !is_identity(&unitaries) {
                step_pieces.push(StepPiece::Singles { unitaries });
            }
        }
    }
    let step_pieces = merge_singles(step_pieces);

    let ancilla_pulses_per_step = step_pieces
        .iter()
        .filter(|p| matches!(p, StepPiece::Pulse { .. }))
        .count();

    let mut report = CompilationReport {
        model: model.clone(),
        circuit,
        array,
        gadget_sizes,
        step_pieces,
        recipes: synth.recipes,
        singles_mode: options.singles_mode,
        rabi: options.rabi,
        program: PulseProgram::default(),
        segments_per_step: 0,
        ancilla_pulses_per_step,
        fidelity: None,
    };
    report.program = report.program_for(1)?;
    report.segments_per_step =
        report.program_for(2)?.segments.len() - report.program.segments.len();
    Ok(report)
}

/// Folds per-bond phases into per-size targets, checking that no size is
/// asked for two different phases in the same pulse.
fn size_targets(
    lattice: &crate::lattice::Lattice,
    assignment: &crate::lattice::GadgetAssignment,
    all_sizes: &[usize],
    bond_phases: &BTreeMap<usize, f64>,
) -> Result<BTreeMap<usize, f64>> {
    let mut targets: BTreeMap<usize, f64> = all_sizes.iter().map(|&s| (s, 0.0)).collect();
    for (&bond, &phase) in bond_phases {
        let class = lattice.bonds[bond].class;
        let size = assignment.size_for(bond, class);
        let entry = targets.get_mut(&size).expect("size catalogued above");
        if distance_to_full_turn(*entry) > NULL_PHASE_TOL
            && (*entry - phase).abs() > NULL_PHASE_TOL
        {
            return Err(Error::compilation(format!(
                "size {size} superatoms are asked for phases {entry} and {phase} \
                 in the same pulse"
            )));
        }
        *entry = phase;
    }
    Ok(targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::QcaVariant;
    use crate::lattice::{Boundary, LatticeSpec};
    use crate::linalg::dagger;

    fn ki_model(n: usize, boundary: Boundary) -> QcaModel {
        QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.9,
                h: 0.45,
                b: 0.6,
            },
            0.8,
            LatticeSpec::chain(n, boundary),
        )
        .unwrap()
    }

    #[test]
    fn synchronous_chain_uses_two_segments_and_one_ancilla_pulse() {
        let report = compile(&ki_model(2, Boundary::Open), &CompileOptions::default()).unwrap();
        assert_eq!(report.segments_per_step, 2);
        assert_eq!(report.ancilla_pulses_per_step, 1);
        assert_eq!(report.program.segments.len(), 2);
        // the mediated pulse precedes the data layer within a step
        assert!(matches!(&report.program.segments[0], Segment::Drive(p) if p.species == Species::Ancilla));
        assert!(matches!(&report.program.segments[1], Segment::Singles(_)));
        assert_eq!(report.recipes.len(), 1);
        assert!(matches!(report.recipes[0], PulseRecipe::ClosedForm(_)));
    }

    #[test]
    fn two_local_chain_uses_six_segments_and_three_ancilla_pulses() {
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
            LatticeSpec::chain(3, Boundary::Open),
        )
        .unwrap();
        let report = compile(&model, &CompileOptions::default()).unwrap();
        assert_eq!(report.ancilla_pulses_per_step, 3);
        assert_eq!(report.segments_per_step, 6);
        // one step carries a trailing basis restoration, so one extra layer
        assert_eq!(report.program.segments.len(), 6);
        let two = report.program_for(2).unwrap();
        assert_eq!(two.segments.len(), 12);
       }

    #[test]
    fn zero_repetitions_is_an_empty_program() {
        let report = compile(&ki_model(3, Boundary::Open), &CompileOptions::default()).unwrap();
        assert!(report.program_for(0).unwrap().segments.is_empty());
    }

    #[test]
    fn physical_singles_reject_site_dependent_layers() {
        let mut options = CompileOptions::default();
        options.singles_mode = SinglesMode::Physical;
        // Open-chain end sites have one bond, bulk sites two, so the
        // z-corrections differ across sites.
        let err = compile(&ki_model(4, Boundary::Open), &options);
        assert!(matches!(err, Err(Error::Config(_))));
        // On a ring every site has two bonds.
        assert!(compile(&ki_model(4, Boundary::Periodic), &options).is_ok());
        // The uniform-degree flag restores compilability on open chains.
        options.uniform_degree = true;
        assert!(compile(&ki_model(4, Boundary::Open), &options).is_ok());
    }

    #[test]
    fn bad_rabi_is_rejected() {
        let mut options = CompileOptions::default();
        options.rabi = 0.0;
        assert!(matches!(
            compile(&ki_model(2, Boundary::Open), &options),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn merge_collapses_inverse_layers() {
        let r = super::super::plan::basis_rotation(0);
        let pieces = vec![
            StepPiece::Singles {
                unitaries: vec![r.clone(), r.clone()],
            },
            StepPiece::Singles {
                unitaries: vec![dagger(&r), dagger(&r)],
            },
        ];
        assert!(merge_singles(pieces).is_empty());
    }
}
