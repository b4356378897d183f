//! Checks a compiled pulse program against the ideal circuit by exact
//! simulation on the blockaded array.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::pxp::{ConstrainedBasis, EvolveOptions, ProgramPropagator};

use super::compile::CompilationReport;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random test states appended to the full computational basis.
    pub random_states: usize,
    pub seed: u64,
    pub evolve: EvolveOptions,
    /// Ancilla population above this marks the run as leaky.
    pub leakage_limit: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            random_states: 20,
            seed: 77,
            evolve: EvolveOptions::default(),
            leakage_limit: 1e-6,
        }
    }
}

/// Worst-case comparison between the program and the ideal step unitary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Smallest overlap-squared with the ideal output over the test set.
    pub worst_fidelity: f64,
    /// Index of the worst test state (basis states first, then random).
    pub worst_state: usize,
    /// Largest probability left outside the all-ancilla-ground sector.
    pub max_leakage: f64,
    /// Whether `max_leakage` breached the configured limit. Leakage is a
    /// distinct failure mode: the program can be faithful on the retained
    /// sector yet still lose population to the ancillas.
    pub leakage_exceeded: bool,
    pub n_states: usize,
    pub repetitions: usize,
}

/// Runs `repetitions` compiled steps on every data basis state plus a set
/// of seeded random states, all embedded with the ancillas in |g>, and
/// compares the ancilla-ground projection of each outcome against the
/// ideal circuit applied the same number of times.
///
/// The projection is not renormalized, so leakage depresses the reported
/// fidelity as well as showing up in `max_leakage`.
pub fn verify(
    report: &CompilationReport,
    repetitions: usize,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let basis = Arc::new(ConstrainedBasis::enumerate(&report.array)?);
    let n_data = basis.n_data();
    let dim_d = 1usize << n_data;
    let n_states = dim_d + options.random_states;

    // Column j of `inputs` is a normalized data-register state.
    let mut inputs: Array2<C64> = Array2::zeros((dim_d, n_states));
    for k in 0..dim_d {
        inputs[[k, k]] = C64::new(1.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for j in dim_d..n_states {
        let mut norm_sqr = 0.0;
        for k in 0..dim_d {
            // Box-Muller pair: the column is Haar-distributed once normalized.
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let v: f64 = rng.gen();
            let r = (-2.0 * u.ln()).sqrt();
            let a = C64::new(r * (2.0 * PI * v).cos(), r * (2.0 * PI * v).sin());
            norm_sqr += a.norm_sqr();
            inputs[[k, j]] = a;
        }
        let scale = norm_sqr.sqrt().recip();
        for k in 0..dim_d {
            inputs[[k, j]] *= scale;
        }
    }

    // Data atoms are the low atom ids, so the embedded row of data
    // configuration k is just the basis index of config k.
    let embed: Vec<usize> = (0..dim_d)
        .map(|k| {
            basis
                .index_of(k as u64)
                .expect("pure data configurations are always allowed")
        })
        .collect();

    let mut psi: Array2<C64> = Array2::zeros((basis.dim(), n_states));
    for j in 0..n_states {
        for k in 0..dim_d {
            psi[[embed[k], j]] = inputs[[k, j]];
        }
    }

    let program = report.program_for(repetitions)?;
    let propagator = ProgramPropagator::new(basis.clone(), &program, &options.evolve)?;
    propagator.apply_amps_batch(&mut psi)?;

    let step = report.circuit.unitary()?;
    let mut ideal = inputs;
    for _ in 0..repetitions {
        ideal = step.dot(&ideal);
    }

    let mut worst_fidelity = f64::INFINITY;
    let mut worst_state = 0;
    let mut max_leakage: f64 = 0.0;
    for j in 0..n_states {
        let mut overlap = C64::new(0.0, 0.0);
        let mut retained = 0.0;
        for k in 0..dim_d {
            let out = psi[[embed[k], j]];
            overlap += ideal[[k, j]].conj() * out;
            retained += out.norm_sqr();
        }
        let fidelity = overlap.norm_sqr();
        if fidelity < worst_fidelity {
            worst_fidelity = fidelity;
            worst_state = j;
        }
        max_leakage = max_leakage.max(1.0 - retained);
    }
    if !worst_fidelity.is_finite() {
        return Err(Error::numeric("verification produced a non-finite fidelity"));
    }

    Ok(VerificationReport {
        worst_fidelity,
        worst_state,
        max_leakage,
        leakage_exceeded: max_leakage > options.leakage_limit,
        n_states,
        repetitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile, ideal_step_unitary, CompileOptions, QcaModel, QcaVariant};
    use crate::lattice::{Boundary, LatticeSpec};
    use crate::linalg::{dagger, expm_i_hermitian, kron, sigma_y, spectral_norm};
    use crate::pxp::Segment;

    fn compile_ki(n: usize) -> CompilationReport {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.7,
                h: 0.35,
                b: 0.5,
            },
            0.9,
            LatticeSpec::chain(n, Boundary::Open),
        )
        .unwrap();
        compile(&model, &CompileOptions::default()).unwrap()
    }

    #[test]
    fn kicked_ising_three_sites_verifies_tightly() {
        let report = compile_ki(3);
        let v = verify(&report, 1, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-8,
            "fidelity {}",
            v.worst_fidelity
        );
        assert!(!v.leakage_exceeded, "leakage {}", v.max_leakage);
        assert_eq!(v.n_states, 8 + 20);
    }

    #[test]
    fn repeated_steps_stay_faithful() {
        let report = compile_ki(2);
        let v = verify(&report, 3, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-8,
            "fidelity {}",
            v.worst_fidelity
        );
        assert_eq!(v.repetitions, 3);
    }

    #[test]
    fn zero_repetitions_is_the_identity() {
        let report = compile_ki(2);
        let v = verify(&report, 0, &VerifyOptions::default()).unwrap();
        assert!((v.worst_fidelity - 1.0).abs() < 1e-12);
        assert!(v.max_leakage < 1e-12);
    }

    #[test]
    fn truncated_gadget_pulse_trips_the_leakage_flag() {
        let mut report = compile_ki(2);
        // Halving the mediated pulse strands ancilla population in |r>.
        for piece in &mut report.step_pieces {
            if let super::super::compile::StepPiece::Pulse { segment, .. } = piece {
                segment.duration *= 0.5;
            }
        }
        report.program = report.program_for(1).unwrap();
        let v = verify(&report, 1, &VerifyOptions::default()).unwrap();
        assert!(v.leakage_exceeded, "leakage {}", v.max_leakage);
        assert!(v.worst_fidelity < 1.0 - 1e-3);
    }

    #[test]
    fn single_axis_two_local_is_a_rotated_kickless_ising_step() {
        let spec = LatticeSpec::chain(3, Boundary::Open);
        let two_local = QcaModel::new(
            QcaVariant::TwoLocal {
                c_x: 0.45,
                c_y: 0.0,
                c_z: 0.0,
                h_x: 0.3,
                h_y: 0.0,
                h_z: 0.0,
            },
            0.7,
            spec.clone(),
        )
        .unwrap();
        let ising = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.45,
                h: 0.3,
                b: 0.0,
            },
            0.7,
            spec,
        )
        .unwrap();

        // The x-basis step is the z-basis step conjugated by the rotation
        // that transports z to x on every site.
        let r = expm_i_hermitian(&sigma_y(), -std::f64::consts::FRAC_PI_4).unwrap();
        let mut big_r = r.clone();
        for _ in 1..3 {
            big_r = kron(&r, &big_r);
        }
        let lhs = ideal_step_unitary(&two_local).unwrap();
        let rhs = dagger(&big_r).dot(&ideal_step_unitary(&ising).unwrap().dot(&big_r));
        assert!(spectral_norm(&(&lhs - &rhs)).unwrap() < 1e-10);

        let report = compile(&two_local, &CompileOptions::default()).unwrap();
        // One interaction sub-step plus two identity axes: same pulse count
        // as the synchronous chain.
        assert_eq!(report.ancilla_pulses_per_step, 1);
        let v = verify(&report, 1, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-8,
            "fidelity {}",
            v.worst_fidelity
        );
    }

    #[test]
    fn inhomogeneous_square_verifies_with_a_synthesized_pulse() {
        let model = QcaModel::new(
            QcaVariant::InhomKickedIsing {
                j_x: 0.6,
                j_y: 0.3,
                h: 0.2,
                b: 0.4,
            },
            0.5,
            LatticeSpec::square(2, 2, Boundary::Open),
        )
        .unwrap();
        let report = compile(&model, &CompileOptions::default()).unwrap();
        assert_eq!(report.ancilla_pulses_per_step, 1);
        assert!(report
            .recipes
            .iter()
            .any(|r| matches!(r, crate::compiler::PulseRecipe::Synthesized { .. })));
        let v = verify(&report, 1, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-6,
            "fidelity {}",
            v.worst_fidelity
        );
        assert!(!v.leakage_exceeded, "leakage {}", v.max_leakage);
    }

    #[test]
    fn physical_singles_verify_on_a_ring() {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.7,
                h: 0.35,
                b: 0.5,
            },
            0.9,
            LatticeSpec::chain(4, Boundary::Periodic),
        )
        .unwrap();
        let mut options = CompileOptions::default();
        options.singles_mode = crate::compiler::SinglesMode::Physical;
        let report = compile(&model, &options).unwrap();
        // Every segment is now a hardware drive.
        assert!(report
            .program
            .segments
            .iter()
            .all(|s| matches!(s, Segment::Drive(_))));
        let v = verify(&report, 1, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-8,
            "fidelity {}",
            v.worst_fidelity
        );
    }

    #[test]
    fn kickless_physical_singles_use_the_two_pulse_composite() {
        let model = QcaModel::new(
            QcaVariant::KickedIsing {
                j: 0.7,
                h: 0.35,
                b: 0.0,
            },
            0.9,
            LatticeSpec::chain(4, Boundary::Periodic),
        )
        .unwrap();
        let mut options = CompileOptions::default();
        options.singles_mode = crate::compiler::SinglesMode::Physical;
        let report = compile(&model, &options).unwrap();
        // b = 0 leaves a pure z rotation, realized as two resonant pi
        // pulses: one gadget drive + two data drives per step.
        assert_eq!(report.segments_per_step, 3);
        let v = verify(&report, 2, &VerifyOptions::default()).unwrap();
        assert!(
            v.worst_fidelity >= 1.0 - 1e-8,
            "fidelity {}",
            v.worst_fidelity
        );
    }
}
