//! Dense state-vector simulation, sampling, stochastic Pauli noise and an
//! analytic outcome oracle.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, InitMode};
use crate::lattice::Sample;
use crate::numtheory::mul_mod;
use crate::params::{gaussian_profile, FactoringParams};
use crate::scalar::Real;

pub const MAX_QUBITS: usize = 24;
/// Largest `D^d` accepted by [`analytic_oracle`].
pub const ORACLE_LIMIT: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{0} qubits exceed the limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("oracle grid D^d = {0} is too large")]
    TooLarge(u64),
    #[error("no outcomes to sample from")]
    EmptyDistribution,
    #[error("noise probability {0} outside [0, 1]")]
    BadNoise(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub num_qubits: usize,
    pub amplitudes: Vec<Complex<T>>,
}

fn gather(index: usize, qubits: &[usize]) -> usize {
    qubits.iter().enumerate().fold(0, |acc, (k, &q)| acc | (index >> q & 1) << k)
}

fn scatter(index: usize, qubits: &[usize], local: usize) -> usize {
    qubits.iter().enumerate().fold(index, |acc, (k, &q)| (acc & !(1 << q)) | ((local >> k & 1) << q))
}

impl<T: Real> StateVector<T> {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(num_qubits));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << num_qubits];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(StateVector { num_qubits, amplitudes })
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self, SimError> {
        let mut s = Self::zero(num_qubits)?;
        s.amplitudes.swap(0, index);
        Ok(s)
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) {
        let amps = &mut self.amplitudes;
        match gate {
            Gate::H { qubit } => {
                let bit = 1 << qubit;
                let h = T::FRAC_1_SQRT_2();
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (amps[i], amps[i | bit]);
                        amps[i] = (a + b) * h;
                        amps[i | bit] = (a - b) * h;
                    }
                }
            }
            Gate::X { qubit } => self.pauli(*qubit, Pauli::X),
            Gate::ControlledPhase { control, target, angle } => {
                let mask = (1 << control) | (1 << target);
                let phase = Complex::from_polar(T::one(), T::of(*angle));
                amps.par_iter_mut().enumerate().filter(|(i, _)| i & mask == mask).for_each(|(_, a)| *a = *a * phase);
            }
            Gate::Swap { a, b } => {
                let (ba, bb) = (1 << a, 1 << b);
                for i in 0..amps.len() {
                    if i & ba != 0 && i & bb == 0 {
                        amps.swap(i, i ^ ba ^ bb);
                    }
                }
            }
            Gate::Perm(p) => {
                let inv = p.inverse_table();
                let cmask = p.controls.iter().fold(0usize, |m, &c| m | 1 << c);
                let old = std::mem::take(amps);
                *amps = (0..old.len())
                    .into_par_iter()
                    .map(|j| {
                        if j & cmask != cmask {
                            return old[j];
                        }
                        let src = scatter(j, &p.targets, inv[gather(j, &p.targets)] as usize);
                        old[src]
                    })
                    .collect();
            }
            Gate::AmpInit { targets, amplitudes } => {
                let vals: Vec<Complex<T>> = amplitudes.iter().map(|c| Complex::new(T::of(c.re), T::of(c.im))).collect();
                let old = std::mem::take(amps);
                *amps = (0..old.len())
                    .into_par_iter()
                    .map(|j| old[scatter(j, targets, 0)] * vals[gather(j, targets)])
                    .collect();
            }
        }
    }

    pub fn pauli(&mut self, qubit: usize, p: Pauli) {
        let bit = 1 << qubit;
        let i_unit = Complex::new(T::zero(), T::one());
        let amps = &mut self.amplitudes;
        for i in 0..amps.len() {
            if i & bit != 0 {
                continue;
            }
            let (a0, a1) = (amps[i], amps[i | bit]);
            match p {
                Pauli::X => {
                    amps[i] = a1;
                    amps[i | bit] = a0;
                }
                Pauli::Y => {
                    amps[i] = -i_unit * a1;
                    amps[i | bit] = i_unit * a0;
                }
                Pauli::Z => amps[i | bit] = -a1,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Stochastic Pauli noise: after every gate each touched qubit suffers a
/// uniformly random X, Y or Z with probability `p`. Averages run over
/// `trajectories` independent trajectories seeded from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p: f64,
    pub seed: u64,
    pub trajectories: usize,
}

/// Noiseless run from `|0...0>`.
pub fn run<T: Real>(circuit: &Circuit) -> Result<StateVector<T>, SimError> {
    let mut s = StateVector::<T>::zero(circuit.num_qubits)?;
    for g in &circuit.gates {
        s.apply(g);
    }
    Ok(s)
}

/// One noisy trajectory. Trajectory `k` uses its own stream derived from
/// `noise.seed` and `k`.
pub fn run_trajectory<T: Real>(circuit: &Circuit, noise: &NoiseSpec, k: u64) -> Result<StateVector<T>, SimError> {
    if !(0.0..=1.0).contains(&noise.p) {
        return Err(SimError::BadNoise(noise.p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(k);
    let mut s = StateVector::<T>::zero(circuit.num_qubits)?;
    for g in &circuit.gates {
        s.apply(g);
        if noise.p > 0.0 {
            for q in g.qubits() {
                if rng.random::<f64>() < noise.p {
                    let which = match rng.random_range(0..3) {
                        0 => Pauli::X,
                        1 => Pauli::Y,
                        _ => Pauli::Z,
                    };
                    s.pauli(q, which);
                }
            }
        }
    }
    Ok(s)
}

/// Probabilities over `num_bits`-bit outcomes. Outcome `x` is read most
/// significant bit first as a bit string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub num_bits: usize,
    pub probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn bitstring(&self, outcome: usize) -> String {
        format!("{outcome:0width$b}", width = self.num_bits)
    }

    pub fn prob_of(&self, bits: &str) -> Option<f64> {
        usize::from_str_radix(bits, 2).ok().and_then(|x| self.probs.get(x).copied())
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Outcomes by decreasing probability; ties by outcome.
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.probs.iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Outcomes with probability above `threshold`, as bit strings.
    pub fn support(&self, threshold: f64) -> Vec<String> {
        self.ranked().into_iter().filter(|&(_, p)| p > threshold).map(|(x, _)| self.bitstring(x)).collect()
    }

    pub fn mass_on(&self, bitstrings: &[&str]) -> f64 {
        bitstrings.iter().filter_map(|b| self.prob_of(b)).sum()
    }

    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        0.5 * (0..n)
            .map(|i| (self.probs.get(i).copied().unwrap_or(0.0) - other.probs.get(i).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }

    /// `{bitstring: probability}` for non-zero entries.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(x, &p)| (self.bitstring(x), p)).collect()
    }
}

/// Exact marginal on `qubits`; the first listed qubit is the most significant
/// outcome bit.
pub fn distribution<T: Real>(state: &StateVector<T>, qubits: &[usize]) -> OutcomeDistribution {
    let nb = qubits.len();
    let mut probs = vec![0.0f64; 1 << nb];
    for (i, a) in state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr().to_f64().unwrap_or(0.0);
        if p == 0.0 {
            continue;
        }
        let x = qubits.iter().fold(0usize, |acc, &q| (acc << 1) | (i >> q & 1));
        probs[x] += p;
    }
    OutcomeDistribution { num_bits: nb, probs }
}

/// Noiseless control-register distribution of a circuit.
pub fn control_distribution<T: Real>(circuit: &Circuit) -> Result<OutcomeDistribution, SimError> {
    Ok(distribution(&run::<T>(circuit)?, &circuit.measured_qubits()))
}

/// Control-register distribution averaged over noisy trajectories. With
/// `p = 0` this is exactly the noiseless distribution.
pub fn noisy_distribution<T: Real>(circuit: &Circuit, noise: &NoiseSpec) -> Result<OutcomeDistribution, SimError> {
    if noise.p == 0.0 || noise.trajectories == 0 {
        return control_distribution::<T>(circuit);
    }
    let dists = trajectory_distributions::<T>(circuit, noise)?;
    let nb = dists[0].num_bits;
    let mut probs = vec![0.0; 1 << nb];
    for d in &dists {
        for (acc, p) in probs.iter_mut().zip(&d.probs) {
            *acc += p;
        }
    }
    let n = dists.len() as f64;
    probs.iter_mut().for_each(|p| *p /= n);
    Ok(OutcomeDistribution { num_bits: nb, probs })
}

/// One control-register distribution per trajectory, in trajectory order.
pub fn trajectory_distributions<T: Real>(circuit: &Circuit, noise: &NoiseSpec) -> Result<Vec<OutcomeDistribution>, SimError> {
    let qubits = circuit.measured_qubits();
    (0..noise.trajectories as u64)
        .into_par_iter()
        .map(|k| run_trajectory::<T>(circuit, noise, k).map(|s| distribution(&s, &qubits)))
        .collect()
}

/// `shots` outcomes drawn from the distribution, in draw order.
pub fn sample(dist: &OutcomeDistribution, shots: usize, seed: u64) -> Result<Vec<usize>, SimError> {
    if shots == 0 {
        return Ok(Vec::new());
    }
    let w = WeightedIndex::new(&dist.probs).map_err(|_| SimError::EmptyDistribution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..shots).map(|_| w.sample(&mut rng)).collect())
}

/// Sorted `{bitstring: count}`.
pub fn counts(dist: &OutcomeDistribution, shots: &[usize]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for &x in shots {
        *out.entry(dist.bitstring(x)).or_insert(0) += 1;
    }
    out
}

/// Splits an outcome into `d` numerators of `log D` bits each, first
/// dimension in the most significant block.
pub fn outcome_to_sample(outcome: usize, d: usize, grid: u64) -> Sample {
    let t = grid.trailing_zeros() as usize;
    let numerators = (0..d).map(|i| ((outcome >> ((d - 1 - i) * t)) as u64) & (grid - 1)).collect();
    Sample { numerators, denominator: grid }
}

/// Exact outcome distribution by direct summation,
/// `P(w) = sum_y |sum_{u: f(u) = y} amp(u) e^{2 pi i <w,u>/D}|^2 / D^d`
/// with `f(u) = prod a_i^{u_i} mod N`. Uses no circuit or gate code.
pub fn analytic_oracle<T: Real>(params: &FactoringParams, init: InitMode) -> Result<OutcomeDistribution, SimError> {
    let d = params.d;
    let grid = params.grid;
    let total = grid.checked_pow(d as u32).filter(|&t| t <= ORACLE_LIMIT).ok_or(SimError::TooLarge(grid.saturating_pow(d as u32)))?;
    let g = grid as usize;
    let n = params.n_value;
    let amp1: Vec<T> = match init {
        InitMode::Uniform => vec![T::one() / T::of(grid as f64).sqrt(); g],
        InitMode::GaussianTop(t) => gaussian_profile::<T>(T::of(params.width), grid, t).amplitudes,
    };
    // powers[i][u] = a_i^u mod N
    let powers: Vec<Vec<u64>> = params
        .squares
        .iter()
        .map(|&a| {
            let mut v = vec![1 % n; g];
            for u in 1..g {
                v[u] = mul_mod(v[u - 1], a, n);
            }
            v
        })
        .collect();
    let digits = |flat: usize| -> Vec<usize> { (0..d).map(|i| flat / g.pow((d - 1 - i) as u32) % g).collect() };

    // group the grid by function value
    let mut classes: BTreeMap<u64, Vec<(Vec<usize>, T)>> = BTreeMap::new();
    for flat in 0..total as usize {
        let u = digits(flat);
        let y = u.iter().enumerate().fold(1 % n, |acc, (i, &ui)| mul_mod(acc, powers[i][ui], n));
        let amp = u.iter().fold(T::one(), |acc, &ui| acc * amp1[ui]);
        classes.entry(y).or_default().push((u, amp));
    }
    let tau = T::of(2.0) * T::PI() / T::of(grid as f64);
    let cis: Vec<Complex<T>> = (0..g).map(|k| Complex::from_polar(T::one(), tau * T::of(k as f64))).collect();
    let norm = T::of(total as f64);
    let probs: Vec<f64> = (0..total as usize)
        .into_par_iter()
        .map(|wf| {
            let w = digits(wf);
            let mut p = T::zero();
            for members in classes.values() {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (u, amp) in members {
                    let phase = w.iter().zip(u).map(|(&a, &b)| a * b).sum::<usize>() % g;
                    acc = acc + cis[phase] * *amp;
                }
                p = p + acc.norm_sqr();
            }
            (p / norm).to_f64().unwrap_or(f64::NAN)
        })
        .collect();
    Ok(OutcomeDistribution { num_bits: d * grid.trailing_zeros() as usize, probs })
}

/// Draws `num_samples` outcomes and converts them to lattice samples.
pub fn draw_samples(dist: &OutcomeDistribution, params: &FactoringParams, seed: u64) -> Result<Vec<Sample>, SimError> {
    Ok(sample(dist, params.num_samples, seed)?
        .into_iter()
        .map(|x| outcome_to_sample(x, params.d, params.grid))
        .collect())
}

/// Random unit vector helper for tests of norm preservation.
pub fn random_state<T: Real>(num_qubits: usize, seed: u64) -> Result<StateVector<T>, SimError> {
    let mut s = StateVector::<T>::zero(num_qubits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in s.amplitudes.iter_mut() {
        *a = Complex::new(T::of(rng.random::<f64>() - 0.5), T::of(rng.random::<f64>() - 0.5));
    }
    let n = s.norm_sqr().sqrt();
    s.amplitudes.iter_mut().for_each(|a| *a = *a / n);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_full, build_qft, control_layout, Method, PermGate};
    use crate::params::{derive_params, ParamOverrides};
    use crate::pebble::Strategy;

    fn n35(grid: u64) -> FactoringParams {
        derive_params(35, &ParamOverrides::default().with_grid(grid)).unwrap()
    }

    const PEAKS8: [&str; 6] = ["000000", "100100", "001111", "111001", "101011", "011101"];

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::<f64>::zero(1).unwrap();
        s.apply(&Gate::H { qubit: 0 });
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes[0].re - h).abs() < 1e-15 && (s.amplitudes[1].re - h).abs() < 1e-15);
        assert_eq!(StateVector::<f64>::zero(25), Err(SimError::TooManyQubits(25)));
    }

    #[test]
    fn prep_then_multiply_by_four() {
        let p = n35(8);
        let enc = crate::circuit::orbit_residues(&p).unwrap();
        let mut s = StateVector::<f64>::zero(3).unwrap();
        s.apply(&Gate::X { qubit: 0 });
        s.apply(&Gate::Perm(PermGate::new(vec![0, 1, 2], vec![], enc.multiply_table(4), "mul").unwrap()));
        assert_eq!(s.amplitudes[0b111].re, 1.0);
    }

    #[test]
    fn uniform_two_qubit_distribution() {
        let mut s = StateVector::<f64>::zero(2).unwrap();
        s.apply(&Gate::H { qubit: 0 });
        s.apply(&Gate::H { qubit: 1 });
        let d = distribution(&s, &[1, 0]);
        assert!(d.probs.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn deterministic_sampling() {
        let s = StateVector::<f64>::basis(2, 0b10).unwrap();
        let d = distribution(&s, &[0, 1]);
        let shots = sample(&d, 100, 3).unwrap();
        let c = counts(&d, &shots);
        assert_eq!(c.len(), 1);
        assert_eq!(c["01"], 100);
        assert_eq!(sample(&d, 10, 9).unwrap(), sample(&d, 10, 9).unwrap());
    }

    #[test]
    fn qft_matches_dft() {
        let layout = control_layout(1, 3);
        let gates = build_qft(8, &layout);
        let w = std::f64::consts::TAU / 8.0;
        for x in 0..8usize {
            let idx = crate::circuit::control_index(
                &crate::circuit::Circuit {
                    num_qubits: 3,
                    gates: vec![],
                    control_qubits: layout.clone(),
                    result_register: vec![],
                    ancilla_registers: vec![],
                    encoding: crate::circuit::StateEncoding::sequential(35, vec![1]),
                    grid: 8,
                },
                &[x as u64],
            );
            let mut s = StateVector::<f64>::basis(3, idx as usize).unwrap();
            for g in &gates {
                s.apply(g);
            }
            for y in 0..8usize {
                let want = Complex::from_polar(1.0 / 8f64.sqrt(), w * (x * y) as f64);
                // value y sits at index y because the layout is MSB on the top qubit
                assert!((s.amplitudes[y] - want).norm() < 1e-12, "x={x} y={y}");
            }
        }
    }

    #[test]
    fn precompute_peaks_and_oracle() {
        let p = n35(8);
        let c = build_full(&p, Method::Precompute, InitMode::Uniform).unwrap();
        assert_eq!(c.num_qubits, 9);
        let d = control_distribution::<f64>(&c).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-9);
        let mut top: Vec<String> = d.ranked().iter().take(6).map(|&(x, _)| d.bitstring(x)).collect();
        top.sort();
        let mut want: Vec<String> = PEAKS8.iter().map(|s| s.to_string()).collect();
        want.sort();
        assert_eq!(top, want);
        let o = analytic_oracle::<f64>(&p, InitMode::Uniform).unwrap();
        assert!(d.total_variation(&o) < 1e-9);
        // (0,0) and (1/2,1/2) carry the largest mass
        let r = o.ranked();
        let mut first_two = vec![o.bitstring(r[0].0), o.bitstring(r[1].0)];
        first_two.sort();
        assert_eq!(first_two, vec!["000000", "100100"]);
    }

    #[test]
    fn trivial_function_concentrates_at_zero() {
        let mut p = n35(8);
        p.squares = vec![1, 1];
        let o = analytic_oracle::<f64>(&p, InitMode::Uniform).unwrap();
        assert!((o.probs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_init_matches_oracle() {
        let p = n35(8);
        let c = build_full(&p, Method::Precompute, InitMode::GaussianTop(3)).unwrap();
        let d = control_distribution::<f64>(&c).unwrap();
        let o = analytic_oracle::<f64>(&p, InitMode::GaussianTop(3)).unwrap();
        assert!(d.total_variation(&o) < 1e-9);
        let c2 = build_full(&p, Method::SquareMultiply(Strategy::Direct), InitMode::GaussianTop(2)).unwrap();
        let d2 = control_distribution::<f64>(&c2).unwrap();
        assert!(d2.total_variation(&analytic_oracle::<f64>(&p, InitMode::GaussianTop(2)).unwrap()) < 1e-9);
    }

    #[test]
    fn f32_simulation_is_close() {
        let p = n35(8);
        let c = build_full(&p, Method::Precompute, InitMode::Uniform).unwrap();
        let a = control_distribution::<f32>(&c).unwrap();
        let b = control_distribution::<f64>(&c).unwrap();
        assert!(a.total_variation(&b) < 1e-5);
    }

    #[test]
    fn zero_noise_is_bit_exact() {
        let p = n35(8);
        let c = build_full(&p, Method::Precompute, InitMode::Uniform).unwrap();
        let noise = NoiseSpec { p: 0.0, seed: 5, trajectories: 16 };
        assert_eq!(noisy_distribution::<f64>(&c, &noise).unwrap(), control_distribution::<f64>(&c).unwrap());
        let noisy = NoiseSpec { p: 0.05, seed: 5, trajectories: 16 };
        assert_eq!(noisy_distribution::<f64>(&c, &noisy).unwrap(), noisy_distribution::<f64>(&c, &noisy).unwrap());
        assert!(run_trajectory::<f64>(&c, &NoiseSpec { p: 1.5, seed: 0, trajectories: 1 }, 0).is_err());
    }

    #[test]
    fn outcome_decoding() {
        let s = outcome_to_sample(0b001111, 2, 8);
        assert_eq!(s.numerators, vec![1, 7]);
        let s = outcome_to_sample(0b00111101, 2, 16);
        assert_eq!(s.numerators, vec![3, 13]);
    }
}
