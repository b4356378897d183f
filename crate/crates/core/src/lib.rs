//! Compilation and exact verification of globally driven dual-species
//! Rydberg quantum cellular automata.

extern crate blas_src as _;

pub mod chaos;
pub mod compiler;
pub mod control;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod pxp;

pub use chaos::{
    clifford_pauli_weight, estimate_g, exact_size_distribution, sample_initial_state,
    simulate_prep_protocol, tetra_moments, tetra_state, Coloring, GEstimate, Observable,
    PrepOutcome, SizeDistribution,
};
pub use compiler::{
    compile, floquet_effective_h, ideal_circuit, ideal_step_unitary, verify, CompilationReport,
    CompileOptions, FloquetEffective, Gate, GateCircuit, QcaModel, QcaVariant, SinglesMode,
    VerificationReport, VerifyOptions,
};
pub use control::{
    controllability_check, cz_pulse_params, grape_error, grape_gradient, grape_optimize,
    time_optimal_scan, ControllabilityCertificate, CzPulseParams, GrapeProblem, GrapeResult,
    ScanConfig, ScanOutcome, ScanPoint,
};
pub use error::{Error, Result};
pub use lattice::{
    AtomArray, BlockadeAudit, Bond, BondClass, Boundary, GadgetAssignment, Lattice, LatticeFamily,
    LatticeSpec, Species,
};
pub use pxp::{
    ancilla_return_check, evolve_segment, hamiltonian_apply, run_program, superatom_reduce,
    ConstrainedBasis, EvolveOptions, ExactSingles, PhaseSchedule, ProgramPropagator, PulseProgram,
    PulseSegment, RunReport, Segment, StateVector,
};
