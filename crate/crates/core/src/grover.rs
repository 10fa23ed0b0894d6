//! Amplitude amplification toward the all-zero data subspace.
//!
//! The oracle reflects about the subspace where the data register reads
//! `|0...0>`; the diffusion reflects about the prepared state `|psi'>`. One
//! iteration applies the oracle first and the diffusion second, which rotates
//! the state by `omega = 2 asin(beta)` in the plane spanned by `|psi'>` and its
//! normalized projection `|o>`, where `beta = <o|psi'>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate, Statevector};

/// Overlaps this close to 0 or 1 have no meaningful rotation angle.
pub const DEGENERATE_OVERLAP: f64 = 1e-12;

fn data_mask(n_data: usize) -> usize {
    (1usize << n_data) - 1
}

fn check_data_qubits(n_data: usize, n_qubits: usize) -> Result<()> {
    if n_data > n_qubits {
        return Err(Error::QubitOutOfRange {
            index: n_data,
            n_qubits,
        });
    }
    Ok(())
}

/// How `|psi'>` is prepared.
#[derive(Clone, Debug)]
pub enum Preparation {
    /// `|psi'> = (B^dagger (x) 1) A |0>`, with `A` acting on all qubits and `B`
    /// on the data register.
    Circuits { database: Circuit, query: Circuit },
    /// `|psi'>` given directly; no circuit is available.
    Injected,
}

/// Oracle and diffusion for one prepared state.
#[derive(Clone, Debug)]
pub struct AAOperators {
    n_data: usize,
    n_index: usize,
    preparation: Preparation,
    psi_prime: Statevector,
}

impl AAOperators {
    pub fn from_circuits(database: Circuit, query: Circuit) -> Result<Self> {
        let n_data = query.n_qubits();
        check_data_qubits(n_data, database.n_qubits())?;
        let mut psi_prime = database.run();
        psi_prime.apply_circuit(&query, true)?;
        Ok(Self {
            n_data,
            n_index: database.n_qubits() - n_data,
            preparation: Preparation::Circuits { database, query },
            psi_prime,
        })
    }

    pub fn injected(psi_prime: Statevector, n_data: usize) -> Result<Self> {
        check_data_qubits(n_data, psi_prime.n_qubits())?;
        Ok(Self {
            n_data,
            n_index: psi_prime.n_qubits() - n_data,
            preparation: Preparation::Injected,
            psi_prime,
        })
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn n_index(&self) -> usize {
        self.n_index
    }

    pub fn preparation(&self) -> &Preparation {
        &self.preparation
    }

    pub fn psi_prime(&self) -> &Statevector {
        &self.psi_prime
    }

    /// `beta = |P_0 |psi'>|`, the overlap with the normalized target.
    pub fn overlap(&self) -> f64 {
        let mask = data_mask(self.n_data);
        self.psi_prime
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn oracle(&self, state: &mut Statevector) -> Result<()> {
        apply_oracle(state, self.n_data)
    }

    /// `2|psi'><psi'| - 1`.
    pub fn diffusion(&self, state: &mut Statevector) -> Result<()> {
        apply_diffusion(state, self)
    }

    /// One oracle-then-diffusion step.
    pub fn step(&self, state: &mut Statevector) -> Result<()> {
        self.oracle(state)?;
        self.diffusion(state)
    }
}

/// `1 - 2 |0><0|_D (x) 1_I`: negates every amplitude whose data register is all zero.
pub fn apply_oracle(state: &mut Statevector, n_data: usize) -> Result<()> {
    check_data_qubits(n_data, state.n_qubits())?;
    let mask = data_mask(n_data);
    for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
        if i & mask == 0 {
            *a = -*a;
        }
    }
    Ok(())
}

/// Reflection about `|psi'>`.
///
/// With circuits this is `-U (1 - 2|0><0|) U^dagger` for `U = (B^dagger (x) 1) A`;
/// an injected state uses `2 <psi'|s> |psi'> - |s>` directly.
pub fn apply_diffusion(state: &mut Statevector, ops: &AAOperators) -> Result<()> {
    if state.n_qubits() != ops.psi_prime.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: ops.psi_prime.n_qubits(),
            actual: state.n_qubits(),
        });
    }
    match &ops.preparation {
        Preparation::Circuits { database, query } => {
            state.apply_circuit(query, false)?;
            state.apply_circuit(database, true)?;
            state.apply(&Gate::PhaseFlipAllZero((0..state.n_qubits()).collect()))?;
            state.apply_circuit(database, false)?;
            state.apply_circuit(query, true)?;
            state.scale(Complex64::new(-1.0, 0.0));
        }
        Preparation::Injected => {
            let c = ops.psi_prime.inner_product(state)? * 2.0;
            for (s, p) in state.amplitudes_mut().iter_mut().zip(ops.psi_prime.amplitudes()) {
                *s = c * p - *s;
            }
        }
    }
    Ok(())
}

/// States after `0..=t` iterations; element 0 is `|psi'>`.
pub fn grover_run(ops: &AAOperators, t: usize) -> Result<Vec<Statevector>> {
    let mut trajectory = Vec::with_capacity(t + 1);
    let mut state = ops.psi_prime.clone();
    trajectory.push(state.clone());
    for _ in 0..t {
        ops.step(&mut state)?;
        trajectory.push(state.clone());
    }
    Ok(trajectory)
}

/// State after exactly `t` iterations.
pub fn grover_state(ops: &AAOperators, t: usize) -> Result<Statevector> {
    let mut state = ops.psi_prime.clone();
    for _ in 0..t {
        ops.step(&mut state)?;
    }
    Ok(state)
}

/// Closed-form trajectory `a_x(t) = A_x sin(omega t + delta_x)` for a real `|psi'>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCurve {
    pub beta: f64,
    pub omega: f64,
    pub initial: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub is_target: Vec<bool>,
}

impl AnalyticCurve {
    /// Builds the curve for real amplitudes `a_prime` whose low `n_data`
    /// qubits form the data register.
    pub fn new(a_prime: &[f64], n_data: usize) -> Result<Self> {
        let n_qubits = crate::sim::log2_exact(a_prime.len())?;
        check_data_qubits(n_data, n_qubits)?;
        let norm = a_prime.iter().map(|x| x * x).sum::<f64>();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        let mask = data_mask(n_data);
        let is_target: Vec<bool> = (0..a_prime.len()).map(|i| i & mask == 0).collect();
        let beta = a_prime
            .iter()
            .zip(&is_target)
            .filter(|(_, &t)| t)
            .map(|(a, _)| a * a)
            .sum::<f64>()
            .sqrt();
        if beta <= DEGENERATE_OVERLAP || beta >= 1.0 - DEGENERATE_OVERLAP {
            return Err(Error::DegenerateOverlap(beta));
        }
        let omega = 2.0 * beta.asin();
        let rest = (1.0 - beta * beta).sqrt();
        let target_phase = rest.acos();
        let other_phase = (-beta).acos();
        let (amplitude, phase) = a_prime
            .iter()
            .zip(&is_target)
            .map(|(&a, &t)| {
                if t {
                    (a / beta, target_phase)
                } else {
                    (a / rest, other_phase)
                }
            })
            .unzip();
        Ok(Self {
            beta,
            omega,
            initial: a_prime.to_vec(),
            amplitude,
            phase,
            is_target,
        })
    }

    pub fn from_state(state: &Statevector, n_data: usize) -> Result<Self> {
        if !state.is_real(1e-12) {
            return Err(Error::InvalidArgument("analytic curve needs real amplitudes".into()));
        }
        Self::new(&state.real_parts(), n_data)
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn amplitude_at(&self, x: usize, t: f64) -> f64 {
        self.amplitude[x] * (self.omega * t + self.phase[x]).sin()
    }

    /// `(a'_x^2 / 2 beta^2) [1 - cos 2(omega t + acos sqrt(1 - beta^2))]` for a target state.
    pub fn hit_probability(&self, x: usize, t: f64) -> Result<f64> {
        if x >= self.dim() || !self.is_target[x] {
            return Err(Error::NotATarget(x));
        }
        let a = self.initial[x];
        let delta = (1.0 - self.beta * self.beta).sqrt().acos();
        Ok(a * a / (2.0 * self.beta * self.beta) * (1.0 - (2.0 * (self.omega * t + delta)).cos()))
    }

    /// Upper bound `a'_x^2 / beta^2` on [`AnalyticCurve::hit_probability`].
    pub fn peak_probability(&self, x: usize) -> f64 {
        (self.initial[x] / self.beta).powi(2)
    }

    pub fn optimal_iterations(&self, m: u32) -> Result<usize> {
        optimal_iterations(self.beta, m)
    }
}

/// `CI[(acos beta + 2 m pi) / (2 asin beta)]` with halves rounded up.
///
/// A ratio within `1e-9` of a half counts as that half, so `beta = 1/sqrt 2`
/// gives exactly 1 despite rounding in `acos` and `asin`.
pub fn optimal_iterations(beta: f64, m: u32) -> Result<usize> {
    if !(beta > DEGENERATE_OVERLAP && beta < 1.0 - DEGENERATE_OVERLAP) {
        return Err(Error::DegenerateOverlap(beta));
    }
    let y = (beta.acos() + 2.0 * m as f64 * PI) / (2.0 * beta.asin());
    Ok((y + 0.5 + 1e-9).floor() as usize)
}

/// One point of the two-vector recurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceState {
    pub a: Vec<f64>,
    /// `<Psi|Psi^(t)>`.
    pub alpha: f64,
    /// `<b|Psi^(t)>`.
    pub beta_t: f64,
}

fn check_unit(v: &[f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Iterates `a(t+1) = 2 alpha(t) a - 4 beta(t) beta a - a(t) + 2 beta(t) b`,
/// the effect of reflecting about `b` and then about `a`.
///
/// `alpha` and `beta_t` advance through their own scalar recurrences rather
/// than being recomputed from the vector.
pub fn recurrence_iterate(a: &[f64], b: &[f64], t: usize) -> Result<Vec<RecurrenceState>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    check_unit(a)?;
    check_unit(b)?;
    let beta = dot(a, b);
    let mut out = Vec::with_capacity(t + 1);
    let mut cur = RecurrenceState {
        a: a.to_vec(),
        alpha: 1.0,
        beta_t: beta,
    };
    for _ in 0..t {
        let next_a = a
            .iter()
            .zip(b)
            .zip(&cur.a)
            .map(|((ax, bx), at)| {
                2.0 * cur.alpha * ax - 4.0 * cur.beta_t * beta * ax - at + 2.0 * cur.beta_t * bx
            })
            .collect();
        let alpha = cur.alpha - 2.0 * cur.beta_t * beta;
        let beta_t = 2.0 * beta * alpha + cur.beta_t;
        out.push(std::mem::replace(
            &mut cur,
            RecurrenceState {
                a: next_a,
                alpha,
                beta_t,
            },
        ));
    }
    out.push(cur);
    Ok(out)
}

/// Closed form of [`recurrence_iterate`] for arbitrary unit `a`, `b`.
///
/// With `theta = asin <a|b>` and `c = (a - sin theta b) / cos theta`, the
/// iterate is `sin((2t+1) theta) b + cos((2t+1) theta) c`; componentwise this is
/// `A_x sin(2 theta t + delta_x)`. Signs of `theta` and of each component are
/// carried through `atan2`, so negative overlaps are handled.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    pub omega: f64,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl ClosedForm {
    pub fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        check_unit(a)?;
        check_unit(b)?;
        let beta = dot(a, b);
        if beta.abs() >= 1.0 - DEGENERATE_OVERLAP {
            return Err(Error::DegenerateOverlap(beta));
        }
        let theta = beta.asin();
        let (s, c) = theta.sin_cos();
        let (amplitude, phase) = a
            .iter()
            .zip(b)
            .map(|(&ax, &bx)| {
                let cx = (ax - s * bx) / c;
                // A sin(delta) = a_x, A cos(delta) = cos(theta) b_x - sin(theta) c_x
                let sin_part = ax;
                let cos_part = c * bx - s * cx;
                (sin_part.hypot(cos_part), sin_part.atan2(cos_part))
            })
            .unzip();
        Ok(Self {
            omega: 2.0 * theta,
            amplitude,
            phase,
        })
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(amp, ph)| amp * (self.omega * t + ph).sin())
            .collect()
    }
}

/// Result of estimating `beta` from the prepared state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub beta: f64,
    /// Shots with an all-zero data register; `None` in exact mode.
    pub successes: Option<u64>,
    pub shots: Option<u64>,
    /// Set when no shot landed in the target subspace.
    pub low_confidence: bool,
}

/// `beta` as `sqrt` of the all-zero-data probability, exact (`shots = None`) or sampled.
pub fn estimate_overlap(ops: &AAOperators, shots: Option<u64>, seed: u64) -> Result<OverlapEstimate> {
    match shots {
        None => Ok(OverlapEstimate {
            beta: ops.overlap(),
            successes: None,
            shots: None,
            low_confidence: false,
        }),
        Some(shots) => {
            let hist = ops.psi_prime.sample_counts(shots, seed)?;
            let mask = data_mask(ops.n_data);
            let successes: u64 = hist
                .counts
                .iter()
                .filter(|(i, _)| *i & mask == 0)
                .map(|(_, c)| c)
                .sum();
            Ok(OverlapEstimate {
                beta: (successes as f64 / shots as f64).sqrt(),
                successes: Some(successes),
                shots: Some(shots),
                low_confidence: successes == 0,
            })
        }
    }
}
