//! Operator-spreading diagnostics measurable with global control.
//!
//! The central quantity is g(t), the variance of a Pauli expectation value
//! over random tetrahedral product states. It contracts the operator size
//! distribution of the Heisenberg-evolved observable, so its decay tracks
//! scrambling while requiring only product-state preparation and single-site
//! readout. The submodules provide the ensemble and its moment operators,
//! sampled and exact evaluations of g, a stabilizer fast path at Clifford
//! parameter points, and the globally-driven preparation protocol.

mod clifford;
mod prep;
mod sample;
mod size;
mod tetra;

pub use clifford::clifford_pauli_weight;
pub use prep::{simulate_prep_protocol, PrepOutcome, PREP_FIDELITY_FLOOR};
pub use sample::{
    coloring_product_state, estimate_g, sample_coloring, sample_initial_state, Coloring,
    GEstimate, Observable, BATCH_COUNT, MAX_SAMPLING_QUBITS,
};
pub use size::{
    exact_size_curve, exact_size_distribution, exhaustive_g, observable_dense, pauli_spectrum,
    SizeDistribution, MAX_DIRECT_QUBITS, MAX_SIZE_QUBITS,
};
pub use tetra::{
    haar_second_moment, tetra_moments, tetra_state, tetra_unitary, TetraMoments,
    MAX_MOMENT_ORDER, TETRA_COUNT,
};
