//! Approximate amplitude encoding for sign-uniform real targets.
//!
//! A layered RY/CNOT ansatz is trained so that its output distribution
//! matches the target in both the computational basis and the Hadamard
//! basis. Matching both distributions pins down the real amplitudes up to a
//! global sign when all target amplitudes share one sign.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, TAU};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{log2_exact, sample_with_rng, seeded_rng, Circuit, Gate, Statevector};

/// Bandwidth of the Gaussian kernel `exp(-bandwidth (j - k)^2)`.
pub const DEFAULT_BANDWIDTH: f64 = 64.0;

const INIT_STREAM: u64 = 1;
const SHOT_STREAM: u64 = 2;

/// Layered hardware-efficient ansatz: each layer is an RY column followed by
/// a CNOT chain `0 -> 1 -> ... -> n-1`, and one trailing RY column closes the
/// circuit. Parameters are ordered layer-major, qubit-minor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ansatz {
    n_qubits: usize,
    n_layers: usize,
    params: Vec<f64>,
}

impl Ansatz {
    pub fn parameter_count(n_qubits: usize, n_layers: usize) -> usize {
        (n_layers + 1) * n_qubits
    }

    pub fn new(n_qubits: usize, n_layers: usize, params: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("ansatz needs at least one qubit".into()));
        }
        let expected = Self::parameter_count(n_qubits, n_layers);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            n_qubits,
            n_layers,
            params,
        })
    }

    pub fn zeros(n_qubits: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, n_layers, vec![0.0; Self::parameter_count(n_qubits, n_layers)])
    }

    /// Parameters drawn uniformly from `[0, 2 pi)`.
    pub fn random(n_qubits: usize, n_layers: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, INIT_STREAM);
        let params = (0..Self::parameter_count(n_qubits, n_layers))
            .map(|_| rng.random::<f64>() * TAU)
            .collect();
        Self::new(n_qubits, n_layers, params)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.n_qubits, self.n_layers, params)
    }

    pub fn circuit(&self) -> Circuit {
        let n = self.n_qubits;
        let mut gates = Vec::with_capacity(self.params.len() + self.n_layers * n.saturating_sub(1));
        let mut theta = self.params.iter();
        for layer in 0..=self.n_layers {
            for q in 0..n {
                gates.push(Gate::ry(q, *theta.next().unwrap()));
            }
            if layer < self.n_layers {
                for q in 0..n.saturating_sub(1) {
                    gates.push(Gate::cnot(q, q + 1));
                }
            }
        }
        Circuit::from_gates(n, gates).expect("ansatz gates are in range")
    }

    /// `U(theta)|0...0>`.
    pub fn output_state(&self) -> Statevector {
        self.circuit().run()
    }
}

/// Fast Walsh-Hadamard transform normalized to be unitary:
/// `out_j = sum_k d_k <j|H^n|k>`.
pub fn walsh_hadamard(d: &[f64]) -> Result<Vec<f64>> {
    log2_exact(d.len())?;
    let mut out = d.to_vec();
    fwht_in_place(&mut out);
    let scale = 1.0 / (d.len() as f64).sqrt();
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

fn fwht_in_place<T>(data: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let mut h = 1;
    while h < data.len() {
        for chunk in data.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Born distribution of `H^n |state>`.
pub fn hadamard_basis_probabilities(state: &Statevector) -> Vec<f64> {
    let mut amps: Vec<Complex64> = state.amplitudes().to_vec();
    fwht_in_place(&mut amps);
    let scale = FRAC_1_SQRT_2.powi(state.n_qubits() as i32).powi(2);
    amps.iter().map(|a| a.norm_sqr() * scale).collect()
}

/// Dense Gaussian kernel matrix over outcome indices.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    dim: usize,
    matrix: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(dim: usize, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument("kernel bandwidth must be positive".into()));
        }
        let mut matrix = vec![0.0; dim * dim];
        for j in 0..dim {
            for k in 0..dim {
                let d = j as f64 - k as f64;
                matrix[j * dim + k] = (-bandwidth * d * d).exp();
            }
        }
        Ok(Self { dim, matrix })
    }

    /// `E_{x~a, y~b} kappa(x, y) = a^T K b`.
    pub fn expectation(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut total = 0.0;
        for j in 0..self.dim {
            if a[j] == 0.0 {
                continue;
            }
            let row = &self.matrix[j * self.dim..(j + 1) * self.dim];
            total += a[j] * row.iter().zip(b).map(|(k, y)| k * y).sum::<f64>();
        }
        total
    }

    pub fn mmd(&self, q: &[f64], p: &[f64]) -> f64 {
        let diff: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        // guard against tiny negative round-off
        self.expectation(&diff, &diff).max(0.0)
    }
}

/// Squared maximum mean discrepancy with a Gaussian kernel.
pub fn mmd(q: &[f64], p: &[f64], bandwidth: f64) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: p.len(),
        });
    }
    Ok(GaussianKernel::new(q.len(), bandwidth)?.mmd(q, p))
}

/// A sign-uniform real target and its Walsh-Hadamard image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetData {
    d: Vec<f64>,
    dh: Vec<f64>,
}

impl TargetData {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        log2_exact(d.len())?;
        let norm = d.iter().map(|x| x * x).sum::<f64>();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        let nonneg = d.iter().all(|&x| x >= 0.0);
        let nonpos = d.iter().all(|&x| x <= 0.0);
        if !(nonneg || nonpos) {
            return Err(Error::MixedSignTarget);
        }
        let dh = walsh_hadamard(&d)?;
        Ok(Self { d, dh })
    }

    pub fn from_state(state: &Statevector) -> Result<Self> {
        if !state.is_real(1e-12) {
            return Err(Error::InvalidArgument("target amplitudes must be real".into()));
        }
        Self::new(state.real_parts())
    }

    pub fn n_qubits(&self) -> usize {
        self.d.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.d
    }

    pub fn hadamard_amplitudes(&self) -> &[f64] {
        &self.dh
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.d.iter().map(|x| x * x).collect()
    }

    pub fn hadamard_probabilities(&self) -> Vec<f64> {
        self.dh.iter().map(|x| x * x).collect()
    }

    /// `|<target|state>|`.
    pub fn fidelity(&self, state: &Statevector) -> Result<f64> {
        if state.dim() != self.d.len() {
            return Err(Error::DimensionMismatch {
                expected: self.d.len(),
                actual: state.dim(),
            });
        }
        Ok(self
            .d
            .iter()
            .zip(state.amplitudes())
            .map(|(t, a)| a * *t)
            .sum::<Complex64>()
            .norm())
    }
}

/// How model distributions are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Born probabilities read from amplitudes.
    Exact,
    /// Empirical frequencies from `shots` samples per distribution.
    Shots { shots: u64, seed: u64 },
}

/// Precomputed loss ingredients for one target.
#[derive(Clone, Debug)]
pub struct MmdObjective {
    target: TargetData,
    p: Vec<f64>,
    p_h: Vec<f64>,
    kernel: GaussianKernel,
}

struct Distributions {
    comp: Vec<f64>,
    hada: Vec<f64>,
}

impl MmdObjective {
    pub fn new(target: TargetData, bandwidth: f64) -> Result<Self> {
        let kernel = GaussianKernel::new(target.d.len(), bandwidth)?;
        Ok(Self {
            p: target.probabilities(),
            p_h: target.hadamard_probabilities(),
            target,
            kernel,
        })
    }

    pub fn target(&self) -> &TargetData {
        &self.target
    }

    fn check(&self, ansatz: &Ansatz) -> Result<()> {
        if ansatz.n_qubits() != self.target.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.target.n_qubits(),
                actual: ansatz.n_qubits(),
            });
        }
        Ok(())
    }

    fn exact_distributions(ansatz: &Ansatz) -> Distributions {
        let state = ansatz.output_state();
        Distributions {
            comp: state.probabilities(),
            hada: hadamard_basis_probabilities(&state),
        }
    }

    fn sampled<R: Rng>(exact: Distributions, shots: u64, rng: &mut R) -> Result<Distributions> {
        let dim = exact.comp.len();
        Ok(Distributions {
            comp: sample_with_rng(&exact.comp, shots, rng)?.frequencies(dim),
            hada: sample_with_rng(&exact.hada, shots, rng)?.frequencies(dim),
        })
    }

    /// `(L1 + L2) / 2`: computational-basis MMD plus Hadamard-basis MMD.
    pub fn loss(&self, ansatz: &Ansatz, estimator: Estimator) -> Result<f64> {
        self.check(ansatz)?;
        let mut dists = Self::exact_distributions(ansatz);
        if let Estimator::Shots { shots, seed } = estimator {
            dists = Self::sampled(dists, shots, &mut seeded_rng(seed, SHOT_STREAM))?;
        }
        Ok(self.loss_from(&dists))
    }

    fn loss_from(&self, d: &Distributions) -> f64 {
        0.5 * (self.kernel.mmd(&d.comp, &self.p) + self.kernel.mmd(&d.hada, &self.p_h))
    }

    /// Parameter-shift gradient of the loss.
    ///
    /// For each parameter `r` the model is evaluated at `theta_r +- pi/2`;
    /// `dL1/dtheta_r = E[k(x~q+, y~q)] - E[k(x~q-, y~q)] - E[k(x~q+, y~p)] + E[k(x~q-, y~p)]`
    /// and `dL2` is the same in the Hadamard basis.
    pub fn gradient(&self, ansatz: &Ansatz, estimator: Estimator) -> Result<Vec<f64>> {
        self.check(ansatz)?;
        let n = ansatz.params().len();
        let shifted = |r: usize, sign: f64| -> Distributions {
            let mut params = ansatz.params().to_vec();
            params[r] += sign * FRAC_PI_2;
            Self::exact_distributions(&ansatz.with_params(params).expect("same shape"))
        };
        let exact: Vec<(Distributions, Distributions)> = (0..n)
            .into_par_iter()
            .map(|r| (shifted(r, 1.0), shifted(r, -1.0)))
            .collect();
        let mut centre = Self::exact_distributions(ansatz);

        let shifted: Vec<(Distributions, Distributions)> = match estimator {
            Estimator::Exact => exact,
            Estimator::Shots { shots, seed } => {
                // one sequential stream keeps shot-mode gradients reproducible
                let mut rng = seeded_rng(seed, SHOT_STREAM);
                centre = Self::sampled(centre, shots, &mut rng)?;
                exact
                    .into_iter()
                    .map(|(plus, minus)| {
                        Ok((
                            Self::sampled(plus, shots, &mut rng)?,
                            Self::sampled(minus, shots, &mut rng)?,
                        ))
                    })
                    .collect::<Result<_>>()?
            }
        };

        let k = &self.kernel;
        Ok(shifted
            .iter()
            .map(|(plus, minus)| {
                let g1 = k.expectation(&plus.comp, &centre.comp)
                    - k.expectation(&minus.comp, &centre.comp)
                    - k.expectation(&plus.comp, &self.p)
                    + k.expectation(&minus.comp, &self.p);
                let g2 = k.expectation(&plus.hada, &centre.hada)
                    - k.expectation(&minus.hada, &centre.hada)
                    - k.expectation(&plus.hada, &self.p_h)
                    + k.expectation(&minus.hada, &self.p_h);
                0.5 * (g1 + g2)
            })
            .collect())
    }
}

/// Loss of `ansatz` against `target`; see [`MmdObjective::loss`].
pub fn loss(ansatz: &Ansatz, target: &TargetData, bandwidth: f64, estimator: Estimator) -> Result<f64> {
    MmdObjective::new(target.clone(), bandwidth)?.loss(ansatz, estimator)
}

/// Gradient of [`loss`]; see [`MmdObjective::gradient`].
pub fn gradient(
    ansatz: &Ansatz,
    target: &TargetData,
    bandwidth: f64,
    estimator: Estimator,
) -> Result<Vec<f64>> {
    MmdObjective::new(target.clone(), bandwidth)?.gradient(ansatz, estimator)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], learning_rate: f64) {
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

/// Step learning rate: `initial` for the first `switch_after` updates, then `later`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub initial: f64,
    pub switch_after: usize,
    pub later: f64,
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        Self {
            initial: 0.1,
            switch_after: 100,
            later: 0.01,
        }
    }
}

impl LearningRateSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        if step < self.switch_after {
            self.initial
        } else {
            self.later
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub bandwidth: f64,
    /// `None` trains on exact distributions.
    pub shots: Option<u64>,
    pub iterations: usize,
    pub schedule: LearningRateSchedule,
    pub adam: AdamConfig,
    pub seed: u64,
    pub keep_snapshots: bool,
}

impl TrainConfig {
    /// Query-encoder setup: 300 updates, 400 shots per distribution when sampled.
    pub fn query(seed: u64) -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            shots: None,
            iterations: 300,
            schedule: LearningRateSchedule::default(),
            adam: AdamConfig::default(),
            seed,
            keep_snapshots: false,
        }
    }

    /// Database-encoder setup: 500 updates, 10000 shots per distribution when sampled.
    pub fn database(seed: u64) -> Self {
        Self {
            iterations: 500,
            ..Self::query(seed)
        }
    }

    pub const QUERY_SHOTS: u64 = 400;
    pub const DATABASE_SHOTS: u64 = 10_000;

    fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Exact loss at the parameters entering each update.
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub final_fidelity: f64,
    pub initial_params: Vec<f64>,
    pub wall_clock_secs: f64,
    pub snapshots: Option<Vec<Vec<f64>>>,
}

/// Trains `shape`'s ansatz from a seeded random start.
///
/// Only the qubit count and depth of `shape` are used; its parameters are
/// replaced by a uniform draw from `[0, 2 pi)` seeded by `config.seed`.
pub fn train(target: &TargetData, shape: &Ansatz, config: &TrainConfig) -> Result<(Ansatz, TrainReport)> {
    config.validate()?;
    let start = Instant::now();
    let objective = MmdObjective::new(target.clone(), config.bandwidth)?;
    let mut ansatz = Ansatz::random(shape.n_qubits(), shape.n_layers(), config.seed)?;
    objective.check(&ansatz)?;
    let initial_params = ansatz.params().to_vec();
    let mut adam = Adam::new(initial_params.len(), config.adam);
    let mut loss_history = Vec::with_capacity(config.iterations);
    let mut snapshots = config.keep_snapshots.then(Vec::new);
    let mut params = initial_params.clone();

    for step in 0..config.iterations {
        loss_history.push(objective.loss(&ansatz, Estimator::Exact)?);
        let estimator = match config.shots {
            None => Estimator::Exact,
            Some(shots) => Estimator::Shots {
                shots,
                seed: config.seed.wrapping_add((step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            },
        };
        let grad = objective.gradient(&ansatz, estimator)?;
        adam.step(&mut params, &grad, config.schedule.rate(step));
        ansatz = ansatz.with_params(params.clone())?;
        if let Some(s) = snapshots.as_mut() {
            s.push(params.clone());
        }
    }

    let final_loss = objective.loss(&ansatz, Estimator::Exact)?;
    let final_fidelity = target.fidelity(&ansatz.output_state())?;
    Ok((
        ansatz,
        TrainReport {
            loss_history,
            final_loss,
            final_fidelity,
            initial_params,
            wall_clock_secs: start.elapsed().as_secs_f64(),
            snapshots,
        },
    ))
}

/// Trains once per seed and keeps the run with the highest final fidelity.
/// Ties keep the earliest seed.
pub fn train_best_of(
    target: &TargetData,
    shape: &Ansatz,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(Ansatz, TrainReport, u64)> {
    let mut best: Option<(Ansatz, TrainReport, u64)> = None;
    for &seed in seeds {
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        let (a, r) = train(target, shape, &cfg)?;
        if best
            .as_ref()
            .is_none_or(|(_, b, _)| r.final_fidelity > b.final_fidelity)
        {
            best = Some((a, r, seed));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("at least one seed is required".into()))
}

/// On-disk form of a trained encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedParams {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub final_fidelity: f64,
}

impl TrainedParams {
    pub fn new(ansatz: &Ansatz, seed: u64, final_fidelity: f64) -> Self {
        Self {
            n_qubits: ansatz.n_qubits(),
            n_layers: ansatz.n_layers(),
            theta: ansatz.params().to_vec(),
            seed,
            final_fidelity,
        }
    }

    pub fn ansatz(&self) -> Result<Ansatz> {
        Ansatz::new(self.n_qubits, self.n_layers, self.theta.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
