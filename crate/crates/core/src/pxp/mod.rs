//! Exact state-vector simulation of globally driven, blockade-constrained
//! atom arrays.
//!
//! The working space is the set of configurations with no blockade edge
//! doubly excited ([`ConstrainedBasis`]); drives act through projected
//! raising and lowering operators, so forbidden configurations are absent by
//! construction rather than suppressed energetically.

pub mod basis;
pub mod evolve;
pub mod pulse;
pub mod state;

pub use basis::ConstrainedBasis;
pub use evolve::{
    apply_singles, evolve_segment, hamiltonian_apply, run_program, superatom_reduce,
    EvolveOptions, ProgramPropagator, RunReport,
};
pub use pulse::{ExactSingles, PhaseSchedule, PulseProgram, PulseSegment, Segment};
pub use state::{ancilla_return_check, StateSnapshot, StateVector};
