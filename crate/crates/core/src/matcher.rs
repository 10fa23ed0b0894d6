//! End-to-end matching: prepare `|psi'>`, amplify, post-select on the data
//! register, and report the index distribution.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aae::{train_best_of, Ansatz, Estimator, TargetData, TrainConfig, TrainedParams};
use crate::encoding::{database_state, Database, EncodingScheme, ImageData};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::grover::{estimate_overlap, grover_state, optimal_iterations, AAOperators, AnalyticCurve};
use crate::sim::{Circuit, Statevector};

/// A state given either by a preparation circuit or by its amplitudes.
#[derive(Clone, Debug)]
pub enum StatePrep {
    Circuit(Circuit),
    State(Statevector),
}

impl StatePrep {
    pub fn n_qubits(&self) -> usize {
        match self {
            StatePrep::Circuit(c) => c.n_qubits(),
            StatePrep::State(s) => s.n_qubits(),
        }
    }

    pub fn state(&self) -> Statevector {
        match self {
            StatePrep::Circuit(c) => c.run(),
            StatePrep::State(s) => s.clone(),
        }
    }
}

/// Applies the real Householder reflection swapping `|q>` and `|0>` to every
/// data block of `state`. The reflection is its own inverse, so it serves as
/// `B^dagger` for any `B` with `B|0> = |q>`.
fn apply_householder(state: &mut Statevector, q: &[f64]) -> Result<()> {
    let dim = q.len();
    let mut v = q.to_vec();
    v[0] -= 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv < 1e-30 {
        return Ok(());
    }
    for block in state.amplitudes_mut().chunks_mut(dim) {
        let proj = block.iter().zip(&v).map(|(a, x)| a * *x).sum::<num_complex::Complex64>();
        let c = proj * (2.0 / vv);
        for (a, x) in block.iter_mut().zip(&v) {
            *a -= c * *x;
        }
    }
    Ok(())
}

/// `(B^dagger (x) 1) A |0>` packaged with its amplification operators.
///
/// Two circuits keep the circuit-level diffusion; any injected state falls
/// back to the dense reflection about `|psi'>`.
pub fn build_matching_state(database: &StatePrep, query: &StatePrep) -> Result<AAOperators> {
    let n_data = query.n_qubits();
    if n_data > database.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: database.n_qubits(),
            actual: n_data,
        });
    }
    match (database, query) {
        (StatePrep::Circuit(a), StatePrep::Circuit(b)) => AAOperators::from_circuits(a.clone(), b.clone()),
        (db, StatePrep::Circuit(b)) => {
            let mut s = db.state();
            s.apply_circuit(b, true)?;
            AAOperators::injected(s, n_data)
        }
        (db, StatePrep::State(q)) => {
            if !q.is_real(1e-12) {
                return Err(Error::InvalidArgument("injected query must be real".into()));
            }
            let mut s = db.state();
            apply_householder(&mut s, &q.real_parts())?;
            AAOperators::injected(s, n_data)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Amplification iterations applied before measurement.
    pub iterations: usize,
    /// `P(index = x)` with the data register post-selected on all zeros.
    pub probabilities: Vec<f64>,
    /// Post-selection failure mass.
    pub others: f64,
    /// `sqrt(P_x / max_y P_y)`.
    pub similarity: Vec<f64>,
    /// Highest-probability index, lowest index on ties.
    pub argmax: usize,
    pub tie: bool,
    /// Whether `argmax` holds an exact copy of the query (unit initial overlap).
    pub exact_match: bool,
    /// Overlap `beta` of the prepared state.
    pub beta: f64,
    pub shots: Option<u64>,
    pub labels: Vec<String>,
    pub hamming_distance: Option<Vec<u32>>,
}

impl MatchReport {
    /// `argmax` when it is an exact match.
    pub fn match_index(&self) -> Option<usize> {
        self.exact_match.then_some(self.argmax)
    }

    /// `argmax` when no exact match exists.
    pub fn closest_index(&self) -> Option<usize> {
        (!self.exact_match).then_some(self.argmax)
    }

    pub fn n_index(&self) -> usize {
        self.probabilities.len()
    }

    /// Attaches per-index labels and, for binary images, Hamming distances.
    pub fn annotate(&mut self, database: &Database, query: &ImageData) -> Result<()> {
        if database.len() != self.n_index() {
            return Err(Error::DimensionMismatch {
                expected: self.n_index(),
                actual: database.len(),
            });
        }
        self.labels = database.labels().to_vec();
        self.hamming_distance = if query.is_binary() && database.images().iter().all(|i| i.is_binary()) {
            Some(
                database
                    .images()
                    .iter()
                    .map(|img| img.hamming_distance(query))
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per index plus a final `others` row.
    ///
    /// Columns: `index,label,probability,similarity,hamming_distance,group`.
    /// `group` ranks distinct Hamming distances from 0 and is blank for
    /// non-binary data.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["index", "label", "probability", "similarity", "hamming_distance", "group"])?;
        let ranks: Option<BTreeMap<u32, usize>> = self.hamming_distance.as_ref().map(|hd| {
            let mut distinct: Vec<u32> = hd.clone();
            distinct.sort_unstable();
            distinct.dedup();
            distinct.into_iter().enumerate().map(|(r, d)| (d, r)).collect()
        });
        for x in 0..self.n_index() {
            let label = self.labels.get(x).cloned().unwrap_or_else(|| x.to_string());
            let (hd, group) = match (&self.hamming_distance, &ranks) {
                (Some(hd), Some(r)) => (hd[x].to_string(), r[&hd[x]].to_string()),
                _ => (String::new(), String::new()),
            };
            w.write_record([
                x.to_string(),
                label,
                g17(self.probabilities[x]),
                g17(self.similarity[x]),
                hd,
                group,
            ])?;
        }
        w.write_record(["others", "others", &g17(self.others), "", "", ""])?;
        w.flush()?;
        Ok(())
    }
}

/// Runs `t` iterations and measures.
///
/// Exact mode reads Born probabilities; shot mode samples the full register
/// and keeps outcomes whose data register is all zero.
pub fn index_distribution(ops: &AAOperators, t: usize, estimator: Estimator) -> Result<MatchReport> {
    let n_data = ops.n_data();
    let n_index = 1usize << ops.n_index();
    let block = 1usize << n_data;
    let state = grover_state(ops, t)?;
    let (probabilities, others, shots) = match estimator {
        Estimator::Exact => {
            let probs = state.probabilities();
            let p: Vec<f64> = (0..n_index).map(|k| probs[k * block]).collect();
            let others = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| i % block != 0)
                .map(|(_, p)| p)
                .sum::<f64>();
            (p, others, None)
        }
        Estimator::Shots { shots, seed } => {
            let hist = state.sample_counts(shots, seed)?;
            let mut counts = vec![0u64; n_index];
            let mut fail = 0u64;
            for (&i, &c) in &hist.counts {
                if i % block == 0 {
                    counts[i / block] += c;
                } else {
                    fail += c;
                }
            }
            let f = shots as f64;
            (counts.iter().map(|&c| c as f64 / f).collect(), fail as f64 / f, Some(shots))
        }
    };

    let mut argmax = 0;
    for (k, &p) in probabilities.iter().enumerate() {
        if p > probabilities[argmax] {
            argmax = k;
        }
    }
    let max = probabilities[argmax];
    let tie = probabilities.iter().filter(|&&p| p == max).count() > 1;
    let similarity = probabilities
        .iter()
        .map(|&p| if max > 0.0 { (p / max).sqrt() } else { 0.0 })
        .collect();
    // initial overlap of the chosen index, read from the prepared state
    let initial = ops.psi_prime().amplitude(argmax * block).norm_sqr() * n_index as f64;

    Ok(MatchReport {
        iterations: t,
        probabilities,
        others,
        similarity,
        argmax,
        tie,
        exact_match: (initial - 1.0).abs() < 1e-6,
        beta: ops.overlap(),
        shots,
        labels: (0..n_index).map(|k| k.to_string()).collect(),
        hamming_distance: None,
    })
}

/// Indices with similarity at least `epsilon`, most similar first.
pub fn candidate_set(report: &MatchReport, epsilon: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("threshold {epsilon} outside [0, 1]")));
    }
    if report.probabilities.is_empty() || report.probabilities.iter().all(|&p| p == 0.0) {
        return Err(Error::EmptyReport);
    }
    // similarities that should be equal can differ in the last ulp
    let tol = 1e-12;
    let mut idx: Vec<usize> = (0..report.n_index())
        .filter(|&x| report.probabilities[x] > 0.0 && report.similarity[x] >= epsilon - tol)
        .collect();
    idx.sort_by(|&a, &b| report.similarity[b].total_cmp(&report.similarity[a]).then(a.cmp(&b)));
    Ok(idx)
}

/// Database indices grouped by Hamming distance to `query`.
pub fn hamming_groups(query: &ImageData, database: &Database) -> Result<BTreeMap<u32, Vec<usize>>> {
    if !query.is_binary() || database.images().iter().any(|i| !i.is_binary()) {
        return Err(Error::InvalidImage("Hamming groups need binary images".into()));
    }
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, img) in database.images().iter().enumerate() {
        groups.entry(img.hamming_distance(query)?).or_default().push(k);
    }
    Ok(groups)
}

/// AAE training inside the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaeTraining {
    pub query_layers: usize,
    pub database_layers: usize,
    pub query: TrainConfig,
    pub database: TrainConfig,
    /// Each encoder keeps the best of these seeds.
    pub seeds: Vec<u64>,
}

impl Default for AaeTraining {
    fn default() -> Self {
        Self {
            query_layers: 3,
            database_layers: 6,
            query: TrainConfig::query(0),
            database: TrainConfig::database(0),
            seeds: vec![0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepMode {
    /// Exact encoded states with a dense query un-preparation.
    Ideal,
    /// Encoders loaded from trained parameters.
    AaeTrained {
        database: TrainedParams,
        query: TrainedParams,
    },
    /// Encoders trained on the fly.
    AaeTrain(AaeTraining),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Iterations {
    Fixed(usize),
    /// Closest-integer optimum for the `m`-th peak.
    Auto { m: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub scheme: EncodingScheme,
    pub prep: PrepMode,
    pub estimator: Estimator,
    pub iterations: Iterations,
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            scheme: EncodingScheme::Frqi,
            prep: PrepMode::Ideal,
            estimator: Estimator::Exact,
            iterations: Iterations::Fixed(0),
            threshold: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub report: MatchReport,
    pub candidates: Vec<usize>,
    pub curve: Option<AnalyticCurve>,
    /// `|<target|U|0>|` of the query and database encoders in AAE modes.
    pub encoder_fidelity: Option<(f64, f64)>,
    pub trained: Option<(TrainedParams, TrainedParams)>,
}

fn encoder(params: &TrainedParams, n_qubits: usize, what: &str) -> Result<Circuit> {
    if params.n_qubits != n_qubits {
        return Err(Error::InvalidArgument(format!(
            "{what} encoder acts on {} qubits, expected {n_qubits}",
            params.n_qubits
        )));
    }
    Ok(params.ansatz()?.circuit())
}

/// Encodes, optionally trains, prepares `|psi'>`, amplifies and measures.
pub fn run_pipeline(database: &Database, query: &ImageData, config: &MatchConfig) -> Result<PipelineResult> {
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::InvalidArgument(format!("threshold {} outside [0, 1]", config.threshold)));
    }
    let db_state = database_state(database, config.scheme)?;
    let q_state = config.scheme.encode(query)?;
    let n_data = q_state.n_qubits();

    let mut encoder_fidelity = None;
    let mut trained = None;
    let (db_prep, q_prep) = match &config.prep {
        PrepMode::Ideal => (StatePrep::State(db_state), StatePrep::State(q_state)),
        PrepMode::AaeTrained { database: dp, query: qp } => {
            let a = encoder(dp, db_state.n_qubits(), "database")?;
            let b = encoder(qp, n_data, "query")?;
            let fq = TargetData::from_state(&q_state)?.fidelity(&b.run())?;
            let fd = TargetData::from_state(&db_state)?.fidelity(&a.run())?;
            encoder_fidelity = Some((fq, fd));
            (StatePrep::Circuit(a), StatePrep::Circuit(b))
        }
        PrepMode::AaeTrain(spec) => {
            let qt = TargetData::from_state(&q_state)?;
            let dt = TargetData::from_state(&db_state)?;
            let (qa, qr, qs) = train_best_of(&qt, &Ansatz::zeros(n_data, spec.query_layers)?, &spec.query, &spec.seeds)?;
            let (da, dr, ds) = train_best_of(
                &dt,
                &Ansatz::zeros(db_state.n_qubits(), spec.database_layers)?,
                &spec.database,
                &spec.seeds,
            )?;
            encoder_fidelity = Some((qr.final_fidelity, dr.final_fidelity));
            trained = Some((
                TrainedParams::new(&da, ds, dr.final_fidelity),
                TrainedParams::new(&qa, qs, qr.final_fidelity),
            ));
            (StatePrep::Circuit(da.circuit()), StatePrep::Circuit(qa.circuit()))
        }
    };

    let ops = build_matching_state(&db_prep, &q_prep)?;
    let t = match config.iterations {
        Iterations::Fixed(t) => t,
        Iterations::Auto { m } => {
            let shots = match config.estimator {
                Estimator::Exact => None,
                Estimator::Shots { shots, .. } => Some(shots),
            };
            let seed = match config.estimator {
                Estimator::Shots { seed, .. } => seed ^ 0x5EED,
                Estimator::Exact => 0,
            };
            optimal_iterations(estimate_overlap(&ops, shots, seed)?.beta, m)?
        }
    };
    let mut report = index_distribution(&ops, t, config.estimator)?;
    report.annotate(database, query)?;
    let candidates = candidate_set(&report, config.threshold)?;
    let curve = AnalyticCurve::from_state(ops.psi_prime(), n_data).ok();
    Ok(PipelineResult {
        report,
        candidates,
        curve,
        encoder_fidelity,
        trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;
    use approx::assert_abs_diff_eq;

    fn toy_ops(query: u8) -> AAOperators {
        let db = database_state(&toy::database(), EncodingScheme::Frqi).unwrap();
        let q = EncodingScheme::Frqi.encode(&toy::image(query).unwrap()).unwrap();
        build_matching_state(&StatePrep::State(db), &StatePrep::State(q)).unwrap()
    }

    #[test]
    fn householder_swaps_query_and_zero() {
        let q = vec![0.6, 0.0, 0.8, 0.0];
        let mut s = Statevector::from_real(&q).unwrap();
        apply_householder(&mut s, &q).unwrap();
        assert_abs_diff_eq!(s.amplitude(0).re, 1.0, epsilon = 1e-15);
        let mut z = Statevector::basis(2, 0);
        apply_householder(&mut z, &q).unwrap();
        for (a, b) in z.real_parts().iter().zip(&q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_item_database() {
        let q = Statevector::from_real(&[0.6, 0.8]).unwrap();
        let ops = build_matching_state(&StatePrep::State(q.clone()), &StatePrep::State(q)).unwrap();
        assert_abs_diff_eq!(ops.psi_prime().amplitude(0).re.abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = StatePrep::State(Statevector::zero(2));
        let b = StatePrep::State(Statevector::zero(3));
        assert!(build_matching_state(&a, &b).is_err());
    }

    #[test]
    fn toy_query_overlap() {
        let ops = toy_ops(0);
        assert_abs_diff_eq!(ops.overlap().powi(2), 0.4375, epsilon = 1e-12);
    }

    #[test]
    fn toy_distribution_at_t0() {
        let r = index_distribution(&toy_ops(0), 0, Estimator::Exact).unwrap();
        assert_abs_diff_eq!(r.probabilities[0], 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(r.probabilities[1], 9.0 / 128.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.others, 0.5625, epsilon = 1e-12);
        assert_eq!((r.argmax, r.tie, r.exact_match), (0, false, true));
    }

    #[test]
    fn absent_query_reports_closest() {
        // 1h differs from 0h in one pixel and is not stored
        let r = index_distribution(&toy_ops(1), 0, Estimator::Exact).unwrap();
        assert_eq!(r.closest_index(), Some(0));
        assert_eq!(r.match_index(), None);
    }

    #[test]
    fn amplification_scales_targets_uniformly() {
        let ops = toy_ops(0);
        let r0 = index_distribution(&ops, 0, Estimator::Exact).unwrap();
        let r5 = index_distribution(&ops, 5, Estimator::Exact).unwrap();
        let ratios: Vec<f64> = r5.probabilities.iter().zip(&r0.probabilities).map(|(a, b)| a / b).collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6);
        assert!(r5.others < r0.others);
        assert_abs_diff_eq!(r5.probabilities.iter().sum::<f64>() + r5.others, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sampled_report_is_shot_normalized() {
        let r = index_distribution(&toy_ops(0), 0, Estimator::Shots { shots: 512, seed: 1 }).unwrap();
        let total: f64 = r.probabilities.iter().sum::<f64>() + r.others;
        assert_abs_diff_eq!(total * 512.0, 512.0, epsilon = 1e-9);
        assert_eq!(r.shots, Some(512));
    }

    #[test]
    fn candidates() {
        let mut r = index_distribution(&toy_ops(2), 0, Estimator::Exact).unwrap();
        r.annotate(&toy::database(), &toy::image(2).unwrap()).unwrap();
        let set = candidate_set(&r, 0.75).unwrap();
        let mut labels: Vec<&str> = set.iter().map(|&k| r.labels[k].as_str()).collect();
        assert_eq!(labels[0], "2h");
        labels.sort();
        assert_eq!(labels, ["0h", "2h", "6h", "Ah"]);
        assert_eq!(candidate_set(&r, 1.0).unwrap(), vec![1]);
        assert_eq!(candidate_set(&r, 0.0).unwrap().len(), 8);
        assert!(candidate_set(&r, 1.5).is_err());
    }

    #[test]
    fn hamming_group_sizes() {
        let db = toy::database();
        let g = hamming_groups(&toy::image(0).unwrap(), &db).unwrap();
        let sizes: Vec<(u32, usize)> = g.iter().map(|(k, v)| (*k, v.len())).collect();
        assert_eq!(sizes, [(0, 1), (1, 3), (2, 3), (3, 1)]);
        let g = hamming_groups(&toy::image(1).unwrap(), &db).unwrap();
        assert_eq!(g.keys().copied().collect::<Vec<_>>(), [1, 2, 3, 4]);
        let single = Database::new(vec![toy::image(5).unwrap()], None).unwrap();
        assert_eq!(hamming_groups(&toy::image(5).unwrap(), &single).unwrap().len(), 1);
        let grey = ImageData::new(vec![0, 3, 1, 2], 4).unwrap();
        assert!(hamming_groups(&grey, &single).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = index_distribution(&toy_ops(0), 0, Estimator::Exact).unwrap();
        r.annotate(&toy::database(), &toy::image(0).unwrap()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,label,probability,similarity,hamming_distance,group");
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!((first[0], first[1], first[3], first[4], first[5]), ("0", "0h", "1", "0", "0"));
        assert_abs_diff_eq!(first[2].parse::<f64>().unwrap(), 0.125, epsilon = 1e-12);
        assert!(lines[9].starts_with("others,others,"));
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn auto_iterations_pick_five() {
        let cfg = MatchConfig {
            iterations: Iterations::Auto { m: 1 },
            ..MatchConfig::default()
        };
        let out = run_pipeline(&toy::database(), &toy::image(0).unwrap(), &cfg).unwrap();
        assert_eq!(out.report.iterations, 5);
        assert!(out.curve.is_some());
    }
}
