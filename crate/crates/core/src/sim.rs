//! Exact statevector simulator.
//!
//! Qubit ordering is little-endian: bit `j` of a basis index is qubit `j`.
//! The data register of a pattern-matching state therefore occupies the low
//! qubits `0..n_data` and the index register sits above it.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance for states built from caller-supplied amplitudes.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Seeded generator used everywhere a random stream is needed.
///
/// ChaCha8 seeded through `seed_from_u64(seed)` and then switched to word
/// stream `stream`. Output is identical on every platform, so histograms and
/// noise draws are bit-reproducible.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    /// Builds a state from explicit amplitudes. The vector length must be a
    /// power of two and the squared norm must be 1 within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_qubits = log2_exact(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(
            amplitudes
                .iter()
                .map(|&a| Complex64::new(a, 0.0))
                .collect(),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    /// Real parts of the amplitudes. Only meaningful for real states.
    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.amplitudes.iter().all(|a| a.im.abs() <= tol)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Raw amplitude access for norm-preserving in-crate transforms.
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Statevector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Probability that measuring `register` yields `value`, where bit `i` of
    /// `value` is the outcome of qubit `register[i]`.
    pub fn projection_probability(&self, register: &[usize], value: u64) -> Result<f64> {
        check_distinct(register, self.n_qubits)?;
        if register.len() < 64 && value >> register.len() != 0 {
            return Err(Error::InvalidArgument(format!(
                "value {value} does not fit in a {}-qubit register",
                register.len()
            )));
        }
        let (mask, pattern) = register_mask(register, value);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == pattern)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate {
            Gate::Ry { qubit, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.apply_real_1q(*qubit, [[c, -s], [s, c]]);
            }
            Gate::H(q) => {
                let h = FRAC_1_SQRT_2;
                self.apply_real_1q(*q, [[h, h], [h, -h]]);
            }
            Gate::X(q) => self.apply_mcx(&[], *q),
            Gate::Cnot { control, target } => self.apply_mcx(&[*control], *target),
            Gate::Mcx { controls, target } => self.apply_mcx(controls, *target),
            Gate::Mcz { controls, target } => {
                let mask = controls.iter().fold(1usize << target, |m, c| m | 1 << c);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
            Gate::PhaseFlipAllZero(register) => {
                let mask = register.iter().fold(0usize, |m, q| m | 1 << q);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask == 0 {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(())
    }

    /// Functional form of [`Statevector::apply`].
    pub fn applied(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    /// Applies `circuit` to the low `circuit.n_qubits()` qubits.
    pub fn apply_circuit(&mut self, circuit: &Circuit, adjoint: bool) -> Result<()> {
        self.apply_circuit_at(circuit, 0, adjoint)
    }

    /// Applies `circuit` with its qubit 0 mapped onto qubit `offset`.
    pub fn apply_circuit_at(&mut self, circuit: &Circuit, offset: usize, adjoint: bool) -> Result<()> {
        if circuit.n_qubits + offset > self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: circuit.n_qubits + offset,
            });
        }
        let apply_one = |state: &mut Self, gate: &Gate| -> Result<()> {
            let gate = if adjoint { gate.adjoint() } else { gate.clone() };
            state.apply(&gate.shifted(offset))
        };
        if adjoint {
            for gate in circuit.gates.iter().rev() {
                apply_one(self, gate)?;
            }
        } else {
            for gate in &circuit.gates {
                apply_one(self, gate)?;
            }
        }
        Ok(())
    }

    /// Draws `shots` i.i.d. outcomes from the Born distribution.
    ///
    /// Each shot consumes one `f64` from [`seeded_rng`]`(seed, 0)` and maps it
    /// through the cumulative distribution, so equal seeds give equal
    /// histograms.
    pub fn sample_counts(&self, shots: u64, seed: u64) -> Result<Histogram> {
        sample_distribution(&self.probabilities(), shots, seed)
    }

    fn apply_real_1q(&mut self, qubit: usize, m: [[f64; 2]; 2]) {
        let stride = 1usize << qubit;
        for base in (0..self.amplitudes.len()).step_by(stride << 1) {
            for i in base..base + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = a0 * m[0][0] + a1 * m[0][1];
                self.amplitudes[i + stride] = a0 * m[1][0] + a1 * m[1][1];
            }
        }
    }

    fn apply_mcx(&mut self, controls: &[usize], target: usize) {
        let cmask = controls.iter().fold(0usize, |m, c| m | 1 << c);
        let tbit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & tbit == 0 && i & cmask == cmask {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }
}

/// Samples from an explicit probability vector; see [`Statevector::sample_counts`].
pub fn sample_distribution(probabilities: &[f64], shots: u64, seed: u64) -> Result<Histogram> {
    sample_with_rng(probabilities, shots, &mut seeded_rng(seed, 0))
}

/// Draws `shots` outcomes from `probabilities` using the caller's generator.
pub fn sample_with_rng<R: Rng + ?Sized>(
    probabilities: &[f64],
    shots: u64,
    rng: &mut R,
) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for &p in probabilities {
        acc += p;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidArgument("distribution has zero mass".into()));
    }
    let last_nonzero = probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probabilities.len() - 1);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let r = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= r).min(last_nonzero);
        *counts.entry(idx).or_insert(0) += 1;
    }
    Ok(Histogram {
        counts,
        total_shots: shots,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, u64>,
    pub total_shots: u64,
}

impl Histogram {
    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn frequency(&self, index: usize) -> f64 {
        self.count(index) as f64 / self.total_shots as f64
    }

    /// Empirical distribution over `dim` outcomes.
    pub fn frequencies(&self, dim: usize) -> Vec<f64> {
        (0..dim).map(|i| self.frequency(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// `exp(-i angle Y / 2)`.
    Ry { qubit: usize, angle: f64 },
    H(usize),
    X(usize),
    Cnot { control: usize, target: usize },
    Mcx { controls: Vec<usize>, target: usize },
    /// Phase -1 when every listed qubit (controls and target) is 1.
    Mcz { controls: Vec<usize>, target: usize },
    /// `1 - 2|0><0|` on the listed register, identity elsewhere.
    PhaseFlipAllZero(Vec<usize>),
}

impl Gate {
    pub fn ry(qubit: usize, angle: f64) -> Self {
        Gate::Ry { qubit, angle }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Ry { qubit, .. } | Gate::H(qubit) | Gate::X(qubit) => vec![*qubit],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Mcx { controls, target } | Gate::Mcz { controls, target } => {
                let mut q = controls.clone();
                q.push(*target);
                q
            }
            Gate::PhaseFlipAllZero(register) => register.clone(),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        check_distinct(&self.qubits(), n_qubits)
    }

    /// Every gate here is self-inverse except RY, whose angle is negated.
    pub fn adjoint(&self) -> Self {
        match self {
            Gate::Ry { qubit, angle } => Gate::Ry {
                qubit: *qubit,
                angle: -angle,
            },
            other => other.clone(),
        }
    }

    fn shifted(&self, offset: usize) -> Self {
        if offset == 0 {
            return self.clone();
        }
        let s = |q: &usize| q + offset;
        match self {
            Gate::Ry { qubit, angle } => Gate::Ry {
                qubit: s(qubit),
                angle: *angle,
            },
            Gate::H(q) => Gate::H(s(q)),
            Gate::X(q) => Gate::X(s(q)),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: s(control),
                target: s(target),
            },
            Gate::Mcx { controls, target } => Gate::Mcx {
                controls: controls.iter().map(s).collect(),
                target: s(target),
            },
            Gate::Mcz { controls, target } => Gate::Mcz {
                controls: controls.iter().map(s).collect(),
                target: s(target),
            },
            Gate::PhaseFlipAllZero(r) => Gate::PhaseFlipAllZero(r.iter().map(s).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .count()
    }

    /// The circuit's output on `|0...0>`.
    pub fn run(&self) -> Statevector {
        let mut state = Statevector::zero(self.n_qubits);
        // gates were validated against n_qubits on insertion
        state
            .apply_circuit(self, false)
            .expect("circuit gates validated on construction");
        state
    }
}

pub(crate) fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

fn check_distinct(qubits: &[usize], n_qubits: usize) -> Result<()> {
    let mut seen = 0u128;
    for &q in qubits {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if seen >> q & 1 == 1 {
            return Err(Error::DuplicateQubit(q));
        }
        seen |= 1 << q;
    }
    Ok(())
}

fn register_mask(register: &[usize], value: u64) -> (usize, usize) {
    register
        .iter()
        .enumerate()
        .fold((0, 0), |(mask, pattern), (bit, &q)| {
            (
                mask | 1 << q,
                pattern | (((value >> bit) & 1) as usize) << q,
            )
        })
}
