//! Time evolution under pulse programs.
//!
//! Every drive Hamiltonian here has the form H(xi) = exp(i xi N) H(0)
//! exp(-i xi N), where N counts excitations of the driven atoms and H(0) is
//! real symmetric. One eigendecomposition of H(0) per segment therefore
//! serves every phase value; individual steps reduce to diagonal phase
//! factors plus transforms into and out of the eigenbasis.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Species;
use crate::linalg::{eigh_real, C64};
use crate::pxp::basis::ConstrainedBasis;
use crate::pxp::pulse::{ExactSingles, PhaseSchedule, PulseProgram, PulseSegment, Segment};
use crate::pxp::state::StateVector;

/// Largest Krylov subspace before a time step is split in half.
const KRYLOV_MAX_DIM: usize = 120;
/// Recursion cap on that splitting.
const KRYLOV_SPLIT_DEPTH: u32 = 40;
/// Norm drift treated as a hard numerical failure inside run_program.
const NORM_DRIFT_LIMIT: f64 = 1e-8;

/// Tunables for the evolution backend.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Use dense diagonalization up to this basis dimension, Krylov above.
    pub dense_cap: usize,
    /// Krylov convergence tolerance.
    pub krylov_tol: f64,
    /// Initial substep count for linear phase ramps.
    pub linear_substeps: usize,
    /// Accept a linear-ramp result once doubling the substeps changes it by
    /// less than this in L2 norm.
    pub linear_tol: f64,
    /// Substep doublings to attempt before reporting non-convergence.
    pub max_linear_doublings: u32,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dense_cap: 4096,
            krylov_tol: 1e-12,
            linear_substeps: 200,
            linear_tol: 1e-10,
            max_linear_doublings: 16,
        }
    }
}

/// Sparse matrix action of one drive on the constrained basis.
struct DriveOperator {
    half_rabi: f64,
    detuning: f64,
    /// Raising pairs (index without the excitation, index with it); the
    /// matrix element between them is Omega/2 at phase zero.
    edges: Vec<(u32, u32)>,
    /// Excitation count over driven atoms, per configuration.
    counts: Vec<f64>,
}

impl DriveOperator {
    fn new(
        basis: &ConstrainedBasis,
        species: Species,
        frozen: &[usize],
        rabi: f64,
        detuning: f64,
    ) -> Self {
        let mut driven = basis.species_mask(species);
        for &a in frozen {
            driven &= !(1u64 << a);
        }
        let mut edges = Vec::new();
        let mut counts = Vec::with_capacity(basis.dim());
        for (idx, &c) in basis.configs().iter().enumerate() {
            counts.push((c & driven).count_ones() as f64);
            let mut rest = c & driven;
            while rest != 0 {
                let bit = rest & rest.wrapping_neg();
                rest ^= bit;
                let lo = basis
                    .index_of(c ^ bit)
                    .expect("removing an excitation keeps a configuration allowed");
                edges.push((lo as u32, idx as u32));
            }
        }
        DriveOperator {
            half_rabi: rabi / 2.0,
            detuning,
            edges,
            counts,
        }
    }

    /// y = H(phase) x, with an optional extra diagonal `slope * N`.
    fn apply(&self, phase: f64, slope: f64, x: &Array1<C64>, y: &mut Array1<C64>) {
        let up = Complex64::from_polar(self.half_rabi, phase);
        let down = up.conj();
        y.fill(Complex64::new(0.0, 0.0));
        for &(lo, hi) in &self.edges {
            let (lo, hi) = (lo as usize, hi as usize);
            y[hi] += up * x[lo];
            y[lo] += down * x[hi];
        }
        let diag = self.detuning + slope;
        if diag != 0.0 {
            for (i, &n) in self.counts.iter().enumerate() {
                y[i] += diag * n * x[i];
            }
        }
    }

    /// Dense H(0) + slope * N as a real symmetric matrix.
    fn dense_h(&self, dim: usize, slope: f64) -> Array2<f64> {
        let mut h = Array2::zeros((dim, dim));
        for &(lo, hi) in &self.edges {
            h[[lo as usize, hi as usize]] = self.half_rabi;
            h[[hi as usize, lo as usize]] = self.half_rabi;
        }
        let diag = self.detuning + slope;
        if diag != 0.0 {
            for (i, &n) in self.counts.iter().enumerate() {
                h[[i, i]] += diag * n;
            }
        }
        h
    }
}

/// psi[i] *= exp(i theta counts[i]).
fn apply_count_phase(counts: &[f64], theta: f64, psi: &mut Array1<C64>) {
    if theta == 0.0 {
        return;
    }
    for (a, &n) in psi.iter_mut().zip(counts.iter()) {
        *a *= Complex64::from_polar(1.0, theta * n);
    }
}

/// Row i of the column batch *= exp(i theta counts[i]).
fn apply_count_phase_batch(counts: &[f64], theta: f64, psi: &mut Array2<C64>) {
    if theta == 0.0 {
        return;
    }
    for (mut row, &n) in psi.rows_mut().into_iter().zip(counts.iter()) {
        let ph = Complex64::from_polar(1.0, theta * n);
        row.mapv_inplace(|a| a * ph);
    }
}

/// Eigendecomposition of a real symmetric matrix, used as a propagator.
struct RealEig {
    vals: Array1<f64>,
    vecs: Array2<f64>,
}

impl RealEig {
    fn new(h: &Array2<f64>) -> Result<Self> {
        let (vals, vecs) = eigh_real(h)?;
        Ok(RealEig { vals, vecs })
    }

    /// psi <- exp(-i H t) psi. The eigenvectors are real, so the transform
    /// splits into two real matrix-vector products per direction.
    fn apply_exp(&self, t: f64, psi: &mut Array1<C64>) {
        let d = psi.len();
        let mut re = Array1::<f64>::zeros(d);
        let mut im = Array1::<f64>::zeros(d);
        for i in 0..d {
            re[i] = psi[i].re;
            im[i] = psi[i].im;
        }
        let vt = self.vecs.t();
        let cre = vt.dot(&re);
        let cim = vt.dot(&im);
        let mut rre = Array1::<f64>::zeros(d);
        let mut rim = Array1::<f64>::zeros(d);
        for j in 0..d {
            let z = Complex64::new(cre[j], cim[j]) * Complex64::from_polar(1.0, -self.vals[j] * t);
            rre[j] = z.re;
            rim[j] = z.im;
        }
        let ore = self.vecs.dot(&rre);
        let oim = self.vecs.dot(&rim);
        for i in 0..d {
            psi[i] = Complex64::new(ore[i], oim[i]);
        }
    }

    /// Column-batched apply_exp: four real matrix products instead of
    /// 4 k matrix-vector products for a k-column batch.
    fn apply_exp_batch(&self, t: f64, psi: &mut Array2<C64>) {
        let (d, k) = psi.dim();
        let mut re = Array2::<f64>::zeros((d, k));
        let mut im = Array2::<f64>::zeros((d, k));
        for ((i, j), a) in psi.indexed_iter() {
            re[[i, j]] = a.re;
            im[[i, j]] = a.im;
        }
        let vt = self.vecs.t();
        let mut cre = vt.dot(&re);
        let mut cim = vt.dot(&im);
        for j in 0..d {
            let ph = Complex64::from_polar(1.0, -self.vals[j] * t);
            for c in 0..k {
                let z = Complex64::new(cre[[j, c]], cim[[j, c]]) * ph;
                cre[[j, c]] = z.re;
                cim[[j, c]] = z.im;
            }
        }
        let ore = self.vecs.dot(&cre);
        let oim = self.vecs.dot(&cim);
        for ((i, j), a) in psi.indexed_iter_mut() {
            *a = Complex64::new(ore[[i, j]], oim[[i, j]]);
        }
    }
}

/// Exponential backend for one drive: dense eigendecomposition below the
/// cap, Lanczos above. The stored generator is H(0) + slope * N.
enum ExpBackend {
    Dense(RealEig),
    Sparse {
        op: DriveOperator,
        slope: f64,
        tol: f64,
    },
}

impl ExpBackend {
    fn build(op: DriveOperator, slope: f64, dim: usize, opts: &EvolveOptions) -> Result<Self> {
        if dim <= opts.dense_cap {
            Ok(ExpBackend::Dense(RealEig::new(&op.dense_h(dim, slope))?))
        } else {
            Ok(ExpBackend::Sparse {
                op,
                slope,
                tol: opts.krylov_tol,
            })
        }
    }

    /// psi <- exp(-i (H(0) + slope N) t) psi.
    fn apply_exp(&self, t: f64, psi: &mut Array1<C64>) -> Result<()> {
        match self {
            ExpBackend::Dense(eig) => {
                eig.apply_exp(t, psi);
                Ok(())
            }
            ExpBackend::Sparse { op, slope, tol } => {
                let out = krylov_expm(
                    &|x: &Array1<C64>, y: &mut Array1<C64>| op.apply(0.0, *slope, x, y),
                    psi,
                    t,
                    *tol,
                    0,
                )?;
                *psi = out;
                Ok(())
            }
        }
    }

    /// Batched apply_exp over state columns. The dense path uses level-3
    /// products; the Krylov path has no batched form and loops columns.
    fn apply_exp_batch(&self, t: f64, psi: &mut Array2<C64>) -> Result<()> {
        match self {
            ExpBackend::Dense(eig) => {
                eig.apply_exp_batch(t, psi);
                Ok(())
            }
            ExpBackend::Sparse { op, slope, tol } => {
                for mut col in psi.columns_mut() {
                    let v = col.to_owned();
                    let out = krylov_expm(
                        &|x: &Array1<C64>, y: &mut Array1<C64>| op.apply(0.0, *slope, x, y),
                        &v,
                        t,
                        *tol,
                        0,
                    )?;
                    col.assign(&out);
                }
                Ok(())
            }
        }
    }
}

/// Lanczos approximation of exp(-i H t) v for Hermitian H given as a matvec.
/// Splits the step in half when the subspace cap is reached.
fn krylov_expm<F>(matvec: &F, v: &Array1<C64>, t: f64, tol: f64, depth: u32) -> Result<Array1<C64>>
where
    F: Fn(&Array1<C64>, &mut Array1<C64>),
{
    let dim = v.len();
    let beta0 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if beta0 == 0.0 || t == 0.0 {
        return Ok(v.clone());
    }

    let mut q_list: Vec<Array1<C64>> = vec![v.mapv(|a| a / beta0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = Array1::<C64>::zeros(dim);
    let mut prev_coeff: Option<Vec<C64>> = None;
    let cap = KRYLOV_MAX_DIM.min(dim);

    for j in 0..cap {
        matvec(&q_list[j], &mut w);
        let alpha = q_list[j]
            .iter()
            .zip(w.iter())
            .map(|(q, y)| (q.conj() * y).re)
            .sum::<f64>();
        alphas.push(alpha);
        // Full reorthogonalization keeps the basis clean at these sizes.
        for q in &q_list {
            let ov: Complex64 = q.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
            if ov.norm() > 0.0 {
                for (wi, qi) in w.iter_mut().zip(q.iter()) {
                    *wi -= ov * qi;
                }
            }
        }
        let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let breakdown = beta < 1e-13 * beta0.max(1.0);

        let coeff = tridiag_exp_column(&alphas, &betas, t)?;
        let converged = match &prev_coeff {
            Some(prev) => {
                let mut diff = 0.0;
                for k in 0..coeff.len() {
                    let p = prev.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0));
                    diff += (coeff[k] - p).norm_sqr();
                }
                diff.sqrt() * beta0 < tol
            }
            None => false,
        };
        if converged || breakdown {
            let mut out = Array1::<C64>::zeros(dim);
            for (k, q) in q_list.iter().enumerate() {
                let c = coeff[k] * beta0;
                for (o, qi) in out.iter_mut().zip(q.iter()) {
                    *o += c * qi;
                }
            }
            return Ok(out);
        }
        prev_coeff = Some(coeff);
        betas.push(beta);
        q_list.push(w.mapv(|a| a / beta));
    }

    if depth >= KRYLOV_SPLIT_DEPTH {
        return Err(Error::numeric(
            "Krylov propagation failed to converge after repeated step splitting",
        ));
    }
    let half = krylov_expm(matvec, v, t / 2.0, tol, depth + 1)?;
    krylov_expm(matvec, &half, t / 2.0, tol, depth + 1)
}

/// First column of exp(-i T t) for the symmetric tridiagonal T defined by
/// `alphas` (diagonal) and `betas` (off-diagonal).
fn tridiag_exp_column(alphas: &[f64], betas: &[f64], t: f64) -> Result<Vec<C64>> {
    let m = alphas.len();
    let mut tm = Array2::<f64>::zeros((m, m));
    for (i, &a) in alphas.iter().enumerate() {
        tm[[i, i]] = a;
    }
    for (i, &b) in betas.iter().enumerate().take(m.saturating_sub(1)) {
        tm[[i, i + 1]] = b;
        tm[[i + 1, i]] = b;
    }
    let (vals, vecs) = eigh_real(&tm)?;
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        let phase = Complex64::from_polar(1.0, -vals[j] * t);
        let w = vecs[[0, j]];
        for (k, o) in out.iter_mut().enumerate() {
            *o += vecs[[k, j]] * phase * w;
        }
    }
    Ok(out)
}

/// Returns H|psi> for the drive Hamiltonian
/// H = (Omega/2) sum_i P (e^{-i xi}|g_i><r_i| + h.c.) P
///   + detuning sum_i |r_i><r_i|,
/// both sums over unfrozen atoms of `species`, projected on the blockade-
/// allowed subspace.
pub fn hamiltonian_apply(
    state: &StateVector,
    species: Species,
    rabi: f64,
    phase: f64,
    detuning: f64,
    frozen: &[usize],
) -> Result<StateVector> {
    if !(rabi > 0.0) {
        return Err(Error::config(format!(
            "rabi frequency must be positive, got {rabi}"
        )));
    }
    if !phase.is_finite() || !detuning.is_finite() {
        return Err(Error::config("phase and detuning must be finite"));
    }
    let basis = state.basis().clone();
    for &a in frozen {
        if a >= basis.n_atoms() {
            return Err(Error::config(format!(
                "frozen atom id {a} out of range for {} atoms",
                basis.n_atoms()
            )));
        }
    }
    let op = DriveOperator::new(&basis, species, frozen, rabi, detuning);
    let mut out = Array1::zeros(basis.dim());
    op.apply(phase, 0.0, state.amps(), &mut out);
    StateVector::from_amplitudes(basis, out)
}

fn segment_backend_and_counts(
    basis: &ConstrainedBasis,
    seg: &PulseSegment,
    slope: f64,
    opts: &EvolveOptions,
) -> Result<(ExpBackend, Vec<f64>)> {
    let op = DriveOperator::new(basis, seg.species, &seg.frozen, seg.rabi, seg.detuning);
    let counts = op.counts.clone();
    let backend = ExpBackend::build(op, slope, basis.dim(), opts)?;
    Ok((backend, counts))
}

/// One piecewise-constant step: psi <- e^{i xi N} e^{-i H0 dt} e^{-i xi N} psi.
fn phase_conjugated_step(
    backend: &ExpBackend,
    counts: &[f64],
    xi: f64,
    dt: f64,
    psi: &mut Array1<C64>,
) -> Result<()> {
    apply_count_phase(counts, -xi, psi);
    backend.apply_exp(dt, psi)?;
    apply_count_phase(counts, xi, psi);
    Ok(())
}

fn phase_conjugated_step_batch(
    backend: &ExpBackend,
    counts: &[f64],
    xi: f64,
    dt: f64,
    psi: &mut Array2<C64>,
) -> Result<()> {
    apply_count_phase_batch(counts, -xi, psi);
    backend.apply_exp_batch(dt, psi)?;
    apply_count_phase_batch(counts, xi, psi);
    Ok(())
}

fn run_linear_substeps(
    backend: &ExpBackend,
    counts: &[f64],
    slope: f64,
    offset: f64,
    duration: f64,
    substeps: usize,
    initial: &Array1<C64>,
) -> Result<Array1<C64>> {
    let dt = duration / substeps as f64;
    let mut psi = initial.clone();
    for k in 0..substeps {
        let xi = offset + slope * (k as f64 + 0.5) * dt;
        phase_conjugated_step(backend, counts, xi, dt, &mut psi)?;
    }
    Ok(psi)
}

/// Applies one drive segment: exact matrix exponential per constant-phase
/// step; midpoint-sampled substeps for a linear ramp, doubled until the
/// result is stable to `linear_tol`.
pub fn evolve_segment(
    state: &StateVector,
    seg: &PulseSegment,
    opts: &EvolveOptions,
) -> Result<StateVector> {
    let basis = state.basis().clone();
    seg.validate(basis.n_atoms())?;
    if seg.duration == 0.0 {
        return Ok(state.clone());
    }

    match &seg.phase {
        PhaseSchedule::Constant { value } => {
            let (backend, counts) = segment_backend_and_counts(&basis, seg, 0.0, opts)?;
            let mut psi = state.amps().clone();
            phase_conjugated_step(&backend, &counts, *value, seg.duration, &mut psi)?;
            StateVector::from_amplitudes(basis, psi)
        }
        PhaseSchedule::PiecewiseConstant { values, dt } => {
            let (backend, counts) = segment_backend_and_counts(&basis, seg, 0.0, opts)?;
            let mut psi = state.amps().clone();
            for &xi in values {
                phase_conjugated_step(&backend, &counts, xi, *dt, &mut psi)?;
            }
            StateVector::from_amplitudes(basis, psi)
        }
        PhaseSchedule::Linear { slope, offset } => {
            if *slope == 0.0 {
                // Degenerate ramp; a single exact step, no discretization.
                let (backend, counts) = segment_backend_and_counts(&basis, seg, 0.0, opts)?;
                let mut psi = state.amps().clone();
                phase_conjugated_step(&backend, &counts, *offset, seg.duration, &mut psi)?;
                return StateVector::from_amplitudes(basis, psi);
            }
            let (backend, counts) = segment_backend_and_counts(&basis, seg, 0.0, opts)?;
            let mut substeps = opts.linear_substeps.max(1);
            let mut prev = run_linear_substeps(
                &backend,
                &counts,
                *slope,
                *offset,
                seg.duration,
                substeps,
                state.amps(),
            )?;
            for _ in 0..opts.max_linear_doublings {
                substeps *= 2;
                let next = run_linear_substeps(
                    &backend,
                    &counts,
                    *slope,
                    *offset,
                    seg.duration,
                    substeps,
                    state.amps(),
                )?;
                let diff = prev
                    .iter()
                    .zip(next.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if diff < opts.linear_tol {
                    return StateVector::from_amplitudes(basis, next);
                }
                prev = next;
            }
            Err(Error::numeric(format!(
                "linear phase ramp did not converge to {} within {} substeps",
                opts.linear_tol, substeps
            )))
        }
    }
}

/// Precomputed in-place form of one exact-singles layer.
struct PreparedGate {
    /// (index with atom in g, index with atom in r), unblocked pairs only.
    pairs: Vec<(u32, u32)>,
    m: [C64; 4],
}

fn prepare_singles(basis: &ConstrainedBasis, singles: &ExactSingles) -> Result<Vec<PreparedGate>> {
    singles.validate(basis.n_atoms())?;
    let mut gates = Vec::with_capacity(singles.ops.len());
    for (atom, op) in &singles.ops {
        let bit = 1u64 << atom;
        let mut pairs = Vec::new();
        for (idx, &c) in basis.configs().iter().enumerate() {
            if c & bit != 0 {
                let lo = basis
                    .index_of(c ^ bit)
                    .expect("removing an excitation keeps a configuration allowed");
                pairs.push((lo as u32, idx as u32));
            }
        }
        gates.push(PreparedGate {
            pairs,
            m: [op[[0, 0]], op[[0, 1]], op[[1, 0]], op[[1, 1]]],
        });
    }
    Ok(gates)
}

fn apply_prepared_singles(gates: &[PreparedGate], psi: &mut Array1<C64>) {
    for g in gates {
        let [m00, m01, m10, m11] = g.m;
        for &(lo, hi) in &g.pairs {
            let a = psi[lo as usize];
            let b = psi[hi as usize];
            psi[lo as usize] = m00 * a + m01 * b;
            psi[hi as usize] = m10 * a + m11 * b;
        }
    }
}

fn apply_prepared_singles_batch(gates: &[PreparedGate], psi: &mut Array2<C64>) {
    let k = psi.ncols();
    for g in gates {
        let [m00, m01, m10, m11] = g.m;
        for &(lo, hi) in &g.pairs {
            for c in 0..k {
                let a = psi[[lo as usize, c]];
                let b = psi[[hi as usize, c]];
                psi[[lo as usize, c]] = m00 * a + m01 * b;
                psi[[hi as usize, c]] = m10 * a + m11 * b;
            }
        }
    }
}

/// Applies exact single-atom gates. Gates act in listed order; an atom whose
/// excited level is blockade-blocked in a given configuration is left
/// untouched there, which keeps the projected operator unitary.
pub fn apply_singles(state: &StateVector, singles: &ExactSingles) -> Result<StateVector> {
    let basis = state.basis().clone();
    let gates = prepare_singles(&basis, singles)?;
    let mut psi = state.amps().clone();
    apply_prepared_singles(&gates, &mut psi);
    StateVector::from_amplitudes(basis, psi)
}

/// Outcome of running a full program: final state plus the L2 norm recorded
/// after every segment.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub state: StateVector,
    pub segment_norms: Vec<f64>,
}

/// Folds `evolve_segment` / `apply_singles` over the program, recording the
/// norm after each segment and failing if it drifts beyond 1e-8.
pub fn run_program(
    initial: &StateVector,
    prog: &PulseProgram,
    opts: &EvolveOptions,
) -> Result<RunReport> {
    let n_atoms = initial.basis().n_atoms();
    prog.validate(n_atoms)?;
    let mut state = initial.clone();
    let mut norms = Vec::with_capacity(prog.segments.len());
    for (k, seg) in prog.segments.iter().enumerate() {
        state = match seg {
            Segment::Drive(p) => evolve_segment(&state, p, opts)?,
            Segment::Singles(s) => apply_singles(&state, s)?,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
            return Err(Error::numeric(format!(
                "norm drifted to {norm} after segment {k}"
            )));
        }
        norms.push(norm);
    }
    Ok(RunReport {
        state,
        segment_norms: norms,
    })
}

/// Effective coupling of a size-S gadget driven on resonance: the collective
/// ground state couples to the single W-like excited state with strength
/// sqrt(S) * Omega.
pub fn superatom_reduce(s: usize, rabi: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::config("gadget size must be at least 1"));
    }
    if !(rabi > 0.0) {
        return Err(Error::config(format!(
            "rabi frequency must be positive, got {rabi}"
        )));
    }
    Ok((s as f64).sqrt() * rabi)
}

/// A pulse program compiled against one basis, with all eigendecompositions
/// done up front. Linear ramps are applied in closed form here: in the frame
/// rotating with the ramp the generator is the constant H(0) + slope * N, so
///   psi(T) = e^{i xi(T) N} exp(-i (H(0) + slope N) T) e^{-i xi(0) N} psi(0),
/// which is the exact limit the substepped path converges to.
pub struct ProgramPropagator {
    basis: Arc<ConstrainedBasis>,
    steps: Vec<PreparedSegment>,
}

enum PreparedSegment {
    Identity,
    Steps {
        counts: Vec<f64>,
        phases: Vec<f64>,
        dt: f64,
        backend: Arc<ExpBackend>,
    },
    LinearExact {
        counts: Vec<f64>,
        xi_start: f64,
        xi_end: f64,
        duration: f64,
        backend: Arc<ExpBackend>,
    },
    Singles(Vec<PreparedGate>),
}

#[derive(PartialEq, Eq, Hash)]
struct BackendKey {
    species: Species,
    frozen: Vec<usize>,
    rabi: u64,
    detuning: u64,
    slope: u64,
}

impl ProgramPropagator {
    pub fn new(
        basis: Arc<ConstrainedBasis>,
        prog: &PulseProgram,
        opts: &EvolveOptions,
    ) -> Result<Self> {
        prog.validate(basis.n_atoms())?;
        let mut cache: HashMap<BackendKey, Arc<ExpBackend>> = HashMap::new();
        let mut steps = Vec::with_capacity(prog.segments.len());
        for seg in &prog.segments {
            match seg {
                Segment::Singles(s) => steps.push(PreparedSegment::Singles(prepare_singles(
                    &basis, s,
                )?)),
                Segment::Drive(p) if p.duration == 0.0 => steps.push(PreparedSegment::Identity),
                Segment::Drive(p) => {
                    let slope = match &p.phase {
                        PhaseSchedule::Linear { slope, .. } => *slope,
                        _ => 0.0,
                    };
                    let mut frozen = p.frozen.clone();
                    frozen.sort_unstable();
                    frozen.dedup();
                    let key = BackendKey {
                        species: p.species,
                        frozen,
                        rabi: p.rabi.to_bits(),
                        detuning: p.detuning.to_bits(),
                        slope: slope.to_bits(),
                    };
                    let op = DriveOperator::new(&basis, p.species, &p.frozen, p.rabi, p.detuning);
                    let counts = op.counts.clone();
                    let backend = match cache.get(&key) {
                        Some(b) => b.clone(),
                        None => {
                            let b = Arc::new(ExpBackend::build(op, slope, basis.dim(), opts)?);
                            cache.insert(key, b.clone());
                            b
                        }
                    };
                    let prepared = match &p.phase {
                        PhaseSchedule::Constant { value } => PreparedSegment::Steps {
                            counts,
                            phases: vec![*value],
                            dt: p.duration,
                            backend,
                        },
                        PhaseSchedule::PiecewiseConstant { values, dt } => PreparedSegment::Steps {
                            counts,
                            phases: values.clone(),
                            dt: *dt,
                            backend,
                        },
                        PhaseSchedule::Linear { slope, offset } => PreparedSegment::LinearExact {
                            counts,
                            xi_start: *offset,
                            xi_end: *offset + *slope * p.duration,
                            duration: p.duration,
                            backend,
                        },
                    };
                    steps.push(prepared);
                }
            }
        }
        Ok(ProgramPropagator { basis, steps })
    }

    pub fn basis(&self) -> &Arc<ConstrainedBasis> {
        &self.basis
    }

    /// Evolve raw amplitudes in place through the whole program.
    pub fn apply_amps(&self, psi: &mut Array1<C64>) -> Result<()> {
        for step in &self.steps {
            match step {
                PreparedSegment::Identity => {}
                PreparedSegment::Steps {
                    counts,
                    phases,
                    dt,
                    backend,
                } => {
                    for &xi in phases {
                        phase_conjugated_step(backend, counts, xi, *dt, psi)?;
                    }
                }
                PreparedSegment::LinearExact {
                    counts,
                    xi_start,
                    xi_end,
                    duration,
                    backend,
                } => {
                    apply_count_phase(counts, -*xi_start, psi);
                    backend.apply_exp(*duration, psi)?;
                    apply_count_phase(counts, *xi_end, psi);
                }
                PreparedSegment::Singles(gates) => apply_prepared_singles(gates, psi),
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let mut psi = state.amps().clone();
        self.apply_amps(&mut psi)?;
        StateVector::from_amplitudes(self.basis.clone(), psi)
    }

    /// Evolve a batch of states stored as matrix columns. Equivalent to
    /// apply_amps on each column, but dense segments run as level-3
    /// products over the whole batch.
    pub fn apply_amps_batch(&self, psi: &mut Array2<C64>) -> Result<()> {
        if psi.nrows() != self.basis.dim() {
            return Err(Error::config(format!(
                "batch has {} rows, basis dimension is {}",
                psi.nrows(),
                self.basis.dim()
            )));
        }
        for step in &self.steps {
            match step {
                PreparedSegment::Identity => {}
                PreparedSegment::Steps {
                    counts,
                    phases,
                    dt,
                    backend,
                } => {
                    for &xi in phases {
                        phase_conjugated_step_batch(backend, counts, xi, *dt, psi)?;
                    }
                }
                PreparedSegment::LinearExact {
                    counts,
                    xi_start,
                    xi_end,
                    duration,
                    backend,
                } => {
                    apply_count_phase_batch(counts, -*xi_start, psi);
                    backend.apply_exp_batch(*duration, psi)?;
                    apply_count_phase_batch(counts, *xi_end, psi);
                }
                PreparedSegment::Singles(gates) => apply_prepared_singles_batch(gates, psi),
            }
        }
        Ok(())
    }
}
