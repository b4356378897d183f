//! Translation of update rules into gate circuits and pulse programs.
//!
//! A model is compiled in two directions that must agree: an ideal circuit
//! acting on the data qubits alone, and a pulse program for the full
//! dual-species array in which mediated gates are realized by driving the
//! gadget ancillas. Verification closes the loop by propagating the pulse
//! program through the blockaded engine and comparing against powers of the
//! exact step unitary.

mod circuit;
mod compile;
mod floquet;
mod model;
mod plan;
mod verify;

pub use circuit::{ideal_circuit, Gate, GateCircuit};
pub use compile::{
    compile, CompilationReport, CompileOptions, GrapeSynthesisOptions, PulseRecipe, SinglesMode,
    StepPiece,
};
pub use floquet::{floquet_effective_h, FloquetEffective, MAX_EFFECTIVE_QUBITS};
pub use model::{
    chronological_layers, ideal_step_unitary, layer_hamiltonian, PauliAxis, QcaModel, QcaVariant,
    StepLayer, AXIS_X, AXIS_Y, AXIS_Z, MAX_DENSE_QUBITS,
};
pub use verify::{verify, VerificationReport, VerifyOptions};
