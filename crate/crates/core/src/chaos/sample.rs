//! Sampled estimation of the operator-spreading diagnostic g(t).
//!
//! The diagnostic is the variance, over random tetrahedral product states, of
//! the expectation value of a fixed Pauli observable after t automaton steps.
//! Because the tetrahedral ensemble is a projective 2-design the variance
//! equals the Haar product-state value, and it contracts to
//! sum_l p_l / 3^l where p_l is the operator size distribution.
//!
//! Estimation runs the ideal gate circuit on dense state vectors, one sample
//! per random coloring, optionally with simulated projective readout noise.
//! Each sample owns a counter-mode RNG stream derived from the global seed,
//! so results are independent of thread scheduling.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{ideal_circuit, PauliAxis, QcaModel};
use crate::error::{Error, Result};

use super::tetra::{tetra_state, TETRA_COUNT};

/// Dense sampled evolution is capped at this many data qubits.
pub const MAX_SAMPLING_QUBITS: usize = 20;

/// Number of batches used for the uncertainty estimate.
pub const BATCH_COUNT: usize = 10;

/// Assignment of a tetrahedral color (1..=4) to every data site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub colors: Vec<u8>,
}

impl Coloring {
    pub fn new(colors: Vec<u8>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::config("coloring must cover at least one site"));
        }
        for (site, &c) in colors.iter().enumerate() {
            if c == 0 || c as usize > TETRA_COUNT {
                return Err(Error::config(format!(
                    "color {c} at site {site} outside 1..={TETRA_COUNT}"
                )));
            }
        }
        Ok(Coloring { colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

/// Draw a uniform i.i.d. coloring of `n` sites from the given seed.
pub fn sample_coloring(n: usize, seed: u64) -> Result<Coloring> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_coloring(n, &mut rng))
}

fn draw_coloring(n: usize, rng: &mut ChaCha8Rng) -> Coloring {
    let colors = (0..n).map(|_| rng.gen_range(1..=TETRA_COUNT as u8)).collect();
    Coloring { colors }
}

/// Product state over the coloring, site s occupying bit s of the index.
pub fn coloring_product_state(coloring: &Coloring) -> Result<Array1<C64>> {
    let n = coloring.len();
    if n > MAX_SAMPLING_QUBITS {
        return Err(Error::Resource {
            what: "dense product state".into(),
            required: n,
            cap: MAX_SAMPLING_QUBITS,
        });
    }
    let singles: Vec<Array1<C64>> = coloring
        .colors
        .iter()
        .map(|&c| tetra_state(c as usize))
        .collect::<Result<_>>()?;
    let mut amps = vec![C64::new(1.0, 0.0)];
    for (site, single) in singles.iter().enumerate() {
        let mut next = vec![C64::new(0.0, 0.0); 1 << (site + 1)];
        for (idx, &a) in amps.iter().enumerate() {
            next[idx] = a * single[0];
            next[idx | (1 << site)] = a * single[1];
        }
        amps = next;
    }
    Ok(Array1::from(amps))
}

/// Uniform random product state: the coloring and its dense state vector.
pub fn sample_initial_state(n: usize, seed: u64) -> Result<(Coloring, Array1<C64>)> {
    let coloring = sample_coloring(n, seed)?;
    let state = coloring_product_state(&coloring)?;
    Ok((coloring, state))
}

/// A traceless observable: one Pauli axis applied uniformly on a support set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    pub axis: PauliAxis,
    pub sites: Vec<usize>,
}

impl Observable {
    pub fn single(axis: PauliAxis, site: usize) -> Self {
        Observable {
            axis,
            sites: vec![site],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.axis > 2 {
            return Err(Error::config(format!(
                "observable axis must be 0..=2, got {}",
                self.axis
            )));
        }
        if self.sites.is_empty() {
            return Err(Error::config("observable support must be non-empty"));
        }
        let mut seen = vec![false; n];
        for &s in &self.sites {
            if s >= n {
                return Err(Error::config(format!(
                    "observable site {s} outside 0..{n}"
                )));
            }
            if seen[s] {
                return Err(Error::config(format!("observable site {s} repeated")));
            }
            seen[s] = true;
        }
        Ok(())
    }

    fn flip_mask(&self) -> usize {
        if self.axis == 2 {
            0
        } else {
            self.sites.iter().map(|&s| 1usize << s).sum()
        }
    }

    /// <psi|O|psi> on a dense state vector.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let support: usize = self.sites.iter().map(|&s| 1usize << s).sum();
        match self.axis {
            2 => {
                // Z string: diagonal, |r> carries +1 and |g> carries -1.
                let mut acc = 0.0;
                for (idx, a) in psi.iter().enumerate() {
                    let ones = (idx & support).count_ones() as usize;
                    let sign = if (self.sites.len() - ones) % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    acc += sign * a.norm_sqr();
                }
                acc
            }
            0 => {
                let mask = self.flip_mask();
                let mut acc = 0.0;
                for (idx, a) in psi.iter().enumerate() {
                    acc += (psi[idx ^ mask].conj() * a).re;
                }
                acc
            }
            _ => {
                // Y string: O|b> = prod_s (-i)^{1-b_s} (+i)^{b_s} |b ^ mask>.
                let mask = self.flip_mask();
                let m = self.sites.len();
                let mut acc = C64::new(0.0, 0.0);
                for (idx, a) in psi.iter().enumerate() {
                    let k = (idx & support).count_ones() as usize;
                    let phase = match (2 * k + 3 * m) % 4 {
                        0 => C64::new(1.0, 0.0),
                        1 => C64::new(0.0, 1.0),
                        2 => C64::new(-1.0, 0.0),
                        _ => C64::new(0.0, -1.0),
                    };
                    acc += psi[idx ^ mask].conj() * phase * a;
                }
                acc.re
            }
        }
    }
}

/// Result of a sampled g(t) estimation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GEstimate {
    /// Step indices 0..=t_max.
    pub times: Vec<usize>,
    /// Noise-corrected variance estimate of <O(t)> per time.
    pub values: Vec<f64>,
    /// Standard deviation over ten batch estimates per time.
    pub uncertainties: Vec<f64>,
    /// Mean of the per-sample expectation values per time.
    pub sample_means: Vec<f64>,
    /// Raw per-sample expectation estimates, indexed [time][sample].
    pub per_sample: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub batches: usize,
    /// Shots per expectation estimate, if readout noise was simulated.
    pub shots: Option<u64>,
}

/// Estimate g(t) = Var_psi <psi|O(t)|psi> over tetrahedral product states.
///
/// With `shots = Some(m)` each expectation is replaced by the mean of m
/// simulated projective readouts, and the estimator subtracts the readout
/// variance so that it stays unbiased for the squared expectation.
pub fn estimate_g(
    model: &QcaModel,
    observable: &Observable,
    t_max: usize,
    n_samples: usize,
    seed: u64,
    shots: Option<u64>,
) -> Result<GEstimate> {
    let circuit = ideal_circuit(model)?;
    let n = circuit.n_qubits();
    if n > MAX_SAMPLING_QUBITS {
        return Err(Error::Resource {
            what: "sampled evolution".into(),
            required: n,
            cap: MAX_SAMPLING_QUBITS,
        });
    }
    observable.validate(n)?;
    if n_samples < BATCH_COUNT {
        return Err(Error::config(format!(
            "need at least {BATCH_COUNT} samples, got {n_samples}"
        )));
    }
    if n_samples % BATCH_COUNT != 0 {
        return Err(Error::config(format!(
            "sample count {n_samples} must divide into {BATCH_COUNT} equal batches"
        )));
    }
    if let Some(m) = shots {
        if m < 2 {
            return Err(Error::config(format!(
                "shot count must be at least 2, got {m}"
            )));
        }
    }

    // One (estimate, readout-noise) trace per sample, in sample order.
    let traces: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples)
        .into_par_iter()
        .map(|sample| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sample as u64);
            let coloring = draw_coloring(n, &mut rng);
            let mut psi = coloring_product_state(&coloring)?;
            let mut xs = Vec::with_capacity(t_max + 1);
            let mut noises = Vec::with_capacity(t_max + 1);
            for t in 0..=t_max {
                if t > 0 {
                    circuit.apply_to(psi.as_slice_mut().expect("contiguous state"))?;
                }
                let e = observable.expectation(psi.as_slice().expect("contiguous state"));
                match shots {
                    None => {
                        xs.push(e);
                        noises.push(0.0);
                    }
                    Some(m) => {
                        let p = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
                        let dist = rand_distr::Binomial::new(m, p).map_err(|err| {
                            Error::numeric(format!("binomial readout draw: {err}"))
                        })?;
                        let k = dist.sample(&mut rng);
                        let mean = 2.0 * (k as f64) / (m as f64) - 1.0;
                        // Sample variance of +-1 outcomes divided by m; its
                        // subtraction makes x^2 - noise unbiased for e^2.
                        let noise = (1.0 - mean * mean) / ((m - 1) as f64);
                        xs.push(mean);
                        noises.push(noise);
                    }
                }
            }
            Ok((xs, noises))
        })
        .collect::<Result<_>>()?;

    let times: Vec<usize> = (0..=t_max).collect();
    let mut values = Vec::with_capacity(t_max + 1);
    let mut uncertainties = Vec::with_capacity(t_max + 1);
    let mut sample_means = Vec::with_capacity(t_max + 1);
    let mut per_sample = Vec::with_capacity(t_max + 1);
    let batch_size = n_samples / BATCH_COUNT;
    for t in 0..=t_max {
        let xs: Vec<f64> = traces.iter().map(|(x, _)| x[t]).collect();
        let noises: Vec<f64> = traces.iter().map(|(_, w)| w[t]).collect();
        values.push(corrected_variance(&xs, &noises));
        sample_means.push(mean(&xs));
        let batch_values: Vec<f64> = (0..BATCH_COUNT)
            .map(|b| {
                let lo = b * batch_size;
                let hi = lo + batch_size;
                corrected_variance(&xs[lo..hi], &noises[lo..hi])
            })
            .collect();
        uncertainties.push(std_dev(&batch_values));
        per_sample.push(xs);
    }

    Ok(GEstimate {
        times,
        values,
        uncertainties,
        sample_means,
        per_sample,
        n_samples,
        batches: BATCH_COUNT,
        shots,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance of the estimates minus the mean readout-noise variance.
fn corrected_variance(xs: &[f64], noises: &[f64]) -> f64 {
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64;
    var - mean(noises)
}

fn std_dev(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{QcaVariant, AXIS_X, AXIS_Z};
    use crate::lattice::{Boundary, LatticeSpec};

    fn ki_chain(n: usize, j: f64, b: f64, h: f64) -> QcaModel {
        QcaModel {
            lattice: LatticeSpec::chain(n, Boundary::Periodic),
            variant: QcaVariant::KickedIsing { j, b, h },
            tau: 1.0,
        }
    }

    #[test]
    fn forced_color_reproduces_the_known_bloch_vector() {
        let coloring = Coloring::new(vec![1; 4]).unwrap();
        let psi = coloring_product_state(&coloring).unwrap();
        let inv = 1.0 / 3f64.sqrt();
        for site in 0..4 {
            let z = Observable::single(AXIS_Z, site);
            assert!((z.expectation(psi.as_slice().unwrap()) + inv).abs() < 1e-12);
            let x = Observable::single(AXIS_X, site);
            assert!((x.expectation(psi.as_slice().unwrap()) - inv).abs() < 1e-12);
        }
    }

    #[test]
    fn color_frequencies_are_uniform() {
        let n = 10_000;
        let coloring = sample_coloring(n, 99).unwrap();
        let mut counts = [0usize; TETRA_COUNT];
        for &c in &coloring.colors {
            counts[c as usize - 1] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for count in counts {
            let freq = count as f64 / n as f64;
            assert!(
                (freq - 0.25).abs() < 5.0 * sigma,
                "frequency {freq} drifts from 1/4"
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let (c1, s1) = sample_initial_state(6, 123).unwrap();
        let (c2, s2) = sample_initial_state(6, 123).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
        let (c3, _) = sample_initial_state(6, 124).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn initial_variance_of_a_single_pauli_is_one_third() {
        // Each tetrahedral state has <sigma_x> = +-1/sqrt(3), so the t = 0
        // variance is 1/3 up to the finite-sample mean correction.
        let model = ki_chain(5, 1.0, 0.8, 1.2);
        let obs = Observable::single(AXIS_X, 2);
        let est = estimate_g(&model, &obs, 0, 250, 7, None).unwrap();
        assert!((est.values[0] - 1.0 / 3.0).abs() < 0.02);
        assert!(est.sample_means[0].abs() < 5.0 / (3.0 * 250f64).sqrt());
        assert!(est.uncertainties[0] < 0.05);
        assert_eq!(est.times, vec![0]);
        assert_eq!(est.shots, None);
    }

    #[test]
    fn estimator_is_deterministic_and_validated() {
        let model = ki_chain(4, 1.0, 0.8, 1.2);
        let obs = Observable::single(AXIS_X, 1);
        let a = estimate_g(&model, &obs, 2, 20, 5, None).unwrap();
        let b = estimate_g(&model, &obs, 2, 20, 5, None).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.uncertainties, b.uncertainties);

        assert!(matches!(
            estimate_g(&model, &obs, 1, 5, 5, None),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            estimate_g(&model, &obs, 1, 15, 5, None),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            estimate_g(&model, &obs, 1, 20, 5, Some(1)),
            Err(Error::Config(_))
        ));
        let big = ki_chain(21, 1.0, 0.8, 1.2);
        assert!(matches!(
            estimate_g(&big, &obs, 1, 20, 5, None),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn sample_mean_stays_consistent_with_zero() {
        let model = ki_chain(6, 1.0, 0.8, 1.2);
        let obs = Observable::single(AXIS_X, 3);
        let est = estimate_g(&model, &obs, 3, 300, 11, None).unwrap();
        for t in 0..=3 {
            let sigma = (est.values[t].max(1e-12) / 300.0).sqrt();
            assert!(
                est.sample_means[t].abs() < 5.0 * sigma,
                "mean {} at t={t} too far from zero",
                est.sample_means[t]
            );
        }
    }

    #[test]
    fn shot_noise_mode_converges_to_the_exact_mode() {
        let model = ki_chain(4, 1.0, 0.8, 1.2);
        let obs = Observable::single(AXIS_X, 1);
        let n_samples = 200;
        let exact = estimate_g(&model, &obs, 2, n_samples, 3, None).unwrap();
        for m in [100u64, 1_000, 10_000] {
            let noisy = estimate_g(&model, &obs, 2, n_samples, 3, Some(m)).unwrap();
            let worst = exact
                .values
                .iter()
                .zip(noisy.values.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            // The same seed reproduces the same colorings, so the gap is
            // pure readout noise with standard error O(1/sqrt(m n_s)).
            assert!(
                worst < 0.7 / (m as f64).sqrt(),
                "shots {m}: gap {worst} too large"
            );
        }
    }

    #[test]
    fn chaotic_decay_is_monotone_in_rank() {
        // Operator spreading in a chaotic chain drives g down monotonically
        // until saturation near 1/(2^N + 1).
        let model = ki_chain(16, 1.0, 0.8, 1.2);
        let obs = Observable::single(AXIS_X, 8);
        let est = estimate_g(&model, &obs, 7, 200, 21, None).unwrap();
        let tail = &est.values[1..];
        let rank_corr = spearman_against_index(tail);
        assert!(
            rank_corr < -0.95,
            "rank correlation {rank_corr} not strongly decreasing: {tail:?}"
        );
        assert!(est.values[1] > 20.0 * est.values[7]);
    }

    /// Spearman rank correlation of a series against its index.
    fn spearman_against_index(values: &[f64]) -> f64 {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut rank = vec![0usize; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let mean_rank = (n as f64 - 1.0) / 2.0;
        let mut num = 0.0;
        let mut den_a = 0.0;
        let mut den_b = 0.0;
        for (i, &r) in rank.iter().enumerate() {
            let a = i as f64 - mean_rank;
            let b = r as f64 - mean_rank;
            num += a * b;
            den_a += a * a;
            den_b += b * b;
        }
        num / (den_a * den_b).sqrt()
    }
}
