//! Encoding-noise study: Gaussian perturbation of encoded images and its
//! effect on the pre-amplification index distribution.
//!
//! For a query `q` and database items `d_x`, the post-selected index
//! distribution is `P(x) = <q|d_x>^2 / N_I`, so every distribution here is
//! computed from overlaps without building the full register.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{frqi_amplitudes, neqr_amplitudes, Database, EncodingScheme, ImageData};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::sim::seeded_rng;

const DATABASE_STREAM: u64 = 1 << 16;
const QUERY_STREAM: u64 = 2 << 16;

/// What the Gaussian noise is added to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    /// The encoded state vector; the result is renormalized.
    StateAmplitudes,
    /// Pixel intensities scaled to `[0, 1]`; FRQI angles are rebuilt from the
    /// noisy values and clipped to `[0, pi/2]`.
    PixelIntensities,
}

impl NoiseTarget {
    pub fn default_for(scheme: EncodingScheme) -> Self {
        match scheme {
            EncodingScheme::Frqi => NoiseTarget::PixelIntensities,
            _ => NoiseTarget::StateAmplitudes,
        }
    }
}

/// `z ~ N(0, 1)` draws, one per entry.
fn standard_normals<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn max_entry(a: &[f64]) -> f64 {
    a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("perturbed vector vanished".into()));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// `(a + eps) / |a + eps|` with `eps_x = sigma z_x`, `sigma = max(a) sigma0`.
fn perturb_with(a: &[f64], sigma0: f64, z: &[f64]) -> Result<Vec<f64>> {
    let sigma = max_entry(a) * sigma0;
    unit(a.iter().zip(z).map(|(x, z)| x + sigma * z).collect())
}

/// Adds i.i.d. `N(0, max(a) sigma0)` noise to a unit vector and renormalizes.
pub fn perturb_amplitudes<R: Rng>(a: &[f64], sigma0: f64, rng: &mut R) -> Result<Vec<f64>> {
    if sigma0 < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma0 {sigma0} is negative")));
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    let z = standard_normals(a.len(), rng);
    perturb_with(a, sigma0, &z)
}

fn pixel_fractions(image: &ImageData) -> Vec<f64> {
    let top = (image.n_levels() - 1) as f64;
    image.intensities().iter().map(|&g| g as f64 / top).collect()
}

fn angles_from_fractions(p: &[f64]) -> Vec<f64> {
    p.iter()
        .map(|x| x.clamp(0.0, 1.0) * std::f64::consts::FRAC_PI_2)
        .collect()
}

/// Encoded vector of `image` and the length of its noise draw.
fn clean_vector(image: &ImageData, scheme: EncodingScheme, target: NoiseTarget) -> Result<(Vec<f64>, usize)> {
    let v = match scheme {
        EncodingScheme::Frqi => frqi_amplitudes(&angles_from_fractions(&pixel_fractions(image)))?,
        EncodingScheme::Neqr => neqr_amplitudes(image),
        EncodingScheme::IdealAmplitude => scheme.encode(image)?.real_parts(),
    };
    let draws = match target {
        NoiseTarget::StateAmplitudes => v.len(),
        NoiseTarget::PixelIntensities => image.n_pixels(),
    };
    Ok((v, draws))
}

fn noisy_vector(
    image: &ImageData,
    clean: &[f64],
    scheme: EncodingScheme,
    target: NoiseTarget,
    sigma0: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    match target {
        NoiseTarget::StateAmplitudes => perturb_with(clean, sigma0, z),
        NoiseTarget::PixelIntensities => {
            if scheme != EncodingScheme::Frqi {
                return Err(Error::InvalidArgument(
                    "pixel-intensity noise is defined for FRQI only".into(),
                ));
            }
            let p = pixel_fractions(image);
            let sigma = max_entry(&p) * sigma0;
            let noisy: Vec<f64> = p.iter().zip(z).map(|(x, z)| x + sigma * z).collect();
            frqi_amplitudes(&angles_from_fractions(&noisy))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `P(x) = <q|d_x>^2 / N_I` for real encoded vectors.
pub fn index_probabilities_dense(query: &[f64], database: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = database.len() as f64;
    database
        .iter()
        .map(|d| {
            if d.len() != query.len() {
                return Err(Error::DimensionMismatch {
                    expected: query.len(),
                    actual: d.len(),
                });
            }
            Ok(dot(query, d).powi(2) / n)
        })
        .collect()
}

/// Closed-form index distribution.
///
/// FRQI: `(1/N_I) (sum_j cos(theta_j - theta_jx) / N_P)^2`.
/// NEQR: `(1/N_I) (#{j : f_j = f_jx} / N_P)^2`, since differing intensity
/// codes are orthogonal.
pub fn index_probabilities_formula(
    query: &ImageData,
    database: &Database,
    scheme: EncodingScheme,
) -> Result<Vec<f64>> {
    let n_i = database.len() as f64;
    let n_p = query.n_pixels() as f64;
    database
        .images()
        .iter()
        .map(|img| {
            if img.n_pixels() != query.n_pixels() || img.n_levels() != query.n_levels() {
                return Err(Error::InvalidImage("query and database images differ in shape".into()));
            }
            let overlap = match scheme {
                EncodingScheme::Frqi => {
                    let a = angles_from_fractions(&pixel_fractions(query));
                    let b = angles_from_fractions(&pixel_fractions(img));
                    a.iter().zip(&b).map(|(x, y)| (x - y).cos()).sum::<f64>()
                }
                EncodingScheme::Neqr => query
                    .intensities()
                    .iter()
                    .zip(img.intensities())
                    .filter(|(a, b)| a == b)
                    .count() as f64,
                EncodingScheme::IdealAmplitude => {
                    return Err(Error::InvalidArgument("no closed form for the ideal amplitude scheme".into()))
                }
            };
            Ok((overlap / n_p).powi(2) / n_i)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub scheme: EncodingScheme,
    pub sigma0: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `None` picks [`NoiseTarget::default_for`] the scheme.
    pub target: Option<NoiseTarget>,
}

impl NoiseConfig {
    pub const SIGMA0_GRID: [f64; 4] = [0.05, 0.1, 0.3, 0.5];

    pub fn new(scheme: EncodingScheme, seeds: Vec<u64>) -> Self {
        Self {
            scheme,
            sigma0: Self::SIGMA0_GRID.to_vec(),
            seeds,
            target: None,
        }
    }

    pub fn target(&self) -> NoiseTarget {
        self.target.unwrap_or(NoiseTarget::default_for(self.scheme))
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("noise study needs at least one seed".into()));
        }
        if self.sigma0.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidArgument("sigma0 values must be non-negative".into()));
        }
        Ok(())
    }
}

/// Noisy outcome for one `(sigma0, seed)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRun {
    pub sigma0: f64,
    pub seed: u64,
    /// `probabilities[q][x]` for query `q`.
    pub probabilities: Vec<Vec<f64>>,
    /// Squared clean-noisy overlap of each query state.
    pub query_fidelity: Vec<f64>,
    /// Squared clean-noisy overlap of each database component.
    pub database_fidelity: Vec<f64>,
}

impl NoiseRun {
    /// Mean over every perturbed state of the run.
    pub fn mean_fidelity(&self) -> f64 {
        let all: Vec<f64> = self.query_fidelity.iter().chain(&self.database_fidelity).copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub sigma0: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    /// Fraction of (seed, query) pairs whose argmax equals `expected_index`.
    pub argmax_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub scheme: EncodingScheme,
    pub target: NoiseTarget,
    pub query_labels: Vec<String>,
    pub index_labels: Vec<String>,
    /// Index each query should land on, when it is stored in the database.
    pub expected_index: Vec<Option<usize>>,
    /// `clean[q][x]`.
    pub clean: Vec<Vec<f64>>,
    pub runs: Vec<NoiseRun>,
    pub summary: Vec<NoiseSummary>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Perturbs every database component and every query for each `(sigma0, seed)`.
///
/// Each component draws its standard normals from its own stream of the seed,
/// and the same draws are scaled for every `sigma0`, so fidelity curves are
/// monotone per seed.
pub fn run_noise_study(database: &Database, queries: &[ImageData], config: &NoiseConfig) -> Result<NoiseReport> {
    config.validate()?;
    if queries.is_empty() {
        return Err(Error::InvalidArgument("noise study needs at least one query".into()));
    }
    let scheme = config.scheme;
    let target = config.target();
    let db_clean = database
        .images()
        .iter()
        .map(|img| clean_vector(img, scheme, target))
        .collect::<Result<Vec<_>>>()?;
    let q_clean = queries
        .iter()
        .map(|img| clean_vector(img, scheme, target))
        .collect::<Result<Vec<_>>>()?;
    let db_vectors: Vec<Vec<f64>> = db_clean.iter().map(|(v, _)| v.clone()).collect();
    let clean = q_clean
        .iter()
        .map(|(q, _)| index_probabilities_dense(q, &db_vectors))
        .collect::<Result<Vec<_>>>()?;
    let expected_index: Vec<Option<usize>> = queries
        .iter()
        .map(|q| database.images().iter().position(|d| d == q))
        .collect();

    let grid: Vec<(f64, u64)> = config
        .sigma0
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let runs = grid
        .par_iter()
        .map(|&(sigma0, seed)| -> Result<NoiseRun> {
            let noisy = |img: &ImageData, (v, n): &(Vec<f64>, usize), stream: u64| {
                let z = standard_normals(*n, &mut seeded_rng(seed, stream));
                noisy_vector(img, v, scheme, target, sigma0, &z)
            };
            let db_noisy = database
                .images()
                .iter()
                .zip(&db_clean)
                .enumerate()
                .map(|(k, (img, c))| noisy(img, c, DATABASE_STREAM + k as u64))
                .collect::<Result<Vec<_>>>()?;
            let q_noisy = queries
                .iter()
                .zip(&q_clean)
                .enumerate()
                .map(|(k, (img, c))| noisy(img, c, QUERY_STREAM + k as u64))
                .collect::<Result<Vec<_>>>()?;
            let probabilities = q_noisy
                .iter()
                .map(|q| index_probabilities_dense(q, &db_noisy))
                .collect::<Result<Vec<_>>>()?;
            let fid = |clean: &[(Vec<f64>, usize)], noisy: &[Vec<f64>]| -> Vec<f64> {
                clean.iter().zip(noisy).map(|((c, _), n)| dot(c, n).powi(2)).collect()
            };
            Ok(NoiseRun {
                sigma0,
                seed,
                probabilities,
                query_fidelity: fid(&q_clean, &q_noisy),
                database_fidelity: fid(&db_clean, &db_noisy),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = config
        .sigma0
        .iter()
        .map(|&s| {
            let these: Vec<&NoiseRun> = runs.iter().filter(|r| r.sigma0 == s).collect();
            let f: Vec<f64> = these.iter().map(|r| r.mean_fidelity()).collect();
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            let var = if f.len() > 1 {
                f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (f.len() - 1) as f64
            } else {
                0.0
            };
            let (mut hits, mut total) = (0usize, 0usize);
            for r in &these {
                for (q, p) in r.probabilities.iter().enumerate() {
                    if let Some(e) = expected_index[q] {
                        total += 1;
                        hits += usize::from(argmax(p) == e);
                    }
                }
            }
            NoiseSummary {
                sigma0: s,
                mean_fidelity: mean,
                std_fidelity: var.sqrt(),
                argmax_accuracy: if total > 0 { hits as f64 / total as f64 } else { f64::NAN },
            }
        })
        .collect();

    Ok(NoiseReport {
        scheme,
        target,
        query_labels: (0..queries.len()).map(|q| q.to_string()).collect(),
        index_labels: database.labels().to_vec(),
        expected_index,
        clean,
        runs,
        summary,
    })
}

fn scheme_name(s: EncodingScheme) -> &'static str {
    match s {
        EncodingScheme::Frqi => "frqi",
        EncodingScheme::Neqr => "neqr",
        EncodingScheme::IdealAmplitude => "ideal_amplitude",
    }
}

impl NoiseReport {
    /// Columns `scheme,sigma0,seed,query,index,probability,fidelity`; the
    /// fidelity column carries the query state's fidelity.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["scheme", "sigma0", "seed", "query", "index", "probability", "fidelity"])?;
        for r in &self.runs {
            for (q, probs) in r.probabilities.iter().enumerate() {
                for (x, p) in probs.iter().enumerate() {
                    w.write_record([
                        scheme_name(self.scheme).to_string(),
                        g17(r.sigma0),
                        r.seed.to_string(),
                        self.query_labels[q].clone(),
                        x.to_string(),
                        g17(*p),
                        g17(r.query_fidelity[q]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `scheme,sigma0,mean_fidelity,std_fidelity,argmax_accuracy,seeds`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["scheme", "sigma0", "mean_fidelity", "std_fidelity", "argmax_accuracy", "seeds"])?;
        let n_seeds = self.runs.iter().filter(|r| Some(r.sigma0) == self.summary.first().map(|s| s.sigma0)).count();
        for s in &self.summary {
            w.write_record([
                scheme_name(self.scheme).to_string(),
                g17(s.sigma0),
                g17(s.mean_fidelity),
                g17(s.std_fidelity),
                g17(s.argmax_accuracy),
                n_seeds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON summary of means; per-run raw values stay in the CSV.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            scheme: EncodingScheme,
            target: NoiseTarget,
            summary: &'a [NoiseSummary],
            clean: &'a [Vec<f64>],
        }
        Ok(serde_json::to_string_pretty(&Out {
            scheme: self.scheme,
            target: self.target,
            summary: &self.summary,
            clean: &self.clean,
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DigitsSet;
    use crate::encoding::database_state;
    use crate::matcher::{build_matching_state, index_distribution, StatePrep};
    use crate::aae::Estimator;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn digits() -> (Database, Vec<ImageData>) {
        let set = DigitsSet::builtin();
        let db = set.database(&[0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let queries = db.images().to_vec();
        (db, queries)
    }

    #[test]
    fn zero_noise_is_identity() {
        let a = vec![0.6, 0.8];
        let out = perturb_amplitudes(&a, 0.0, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(out, a);
        assert!(perturb_amplitudes(&[1.0, 1.0], 0.1, &mut seeded_rng(1, 0)).is_err());
        assert!(perturb_amplitudes(&a, -0.1, &mut seeded_rng(1, 0)).is_err());
    }

    #[test]
    fn formula_matches_dense_and_pipeline() {
        let (db, queries) = digits();
        let small = Database::new(db.images()[..4].to_vec(), None).unwrap();
        for scheme in [EncodingScheme::Frqi, EncodingScheme::Neqr] {
            for q in &queries[..3] {
                let f = index_probabilities_formula(q, &small, scheme).unwrap();
                let ops = build_matching_state(
                    &StatePrep::State(database_state(&small, scheme).unwrap()),
                    &StatePrep::State(scheme.encode(q).unwrap()),
                )
                .unwrap();
                let r = index_distribution(&ops, 0, Estimator::Exact).unwrap();
                for (a, b) in f.iter().zip(&r.probabilities) {
                    assert!((a - b).abs() < 1e-10, "{scheme:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn self_query_has_full_overlap() {
        let (db, queries) = digits();
        for scheme in [EncodingScheme::Frqi, EncodingScheme::Neqr] {
            let p = index_probabilities_formula(&queries[3], &db, scheme).unwrap();
            assert_abs_diff_eq!(p[3], 1.0 / 8.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_sigma_reproduces_clean() {
        let (db, queries) = digits();
        for scheme in [EncodingScheme::Frqi, EncodingScheme::Neqr] {
            let cfg = NoiseConfig {
                sigma0: vec![0.0],
                ..NoiseConfig::new(scheme, vec![1, 2])
            };
            let rep = run_noise_study(&db, &queries, &cfg).unwrap();
            for r in &rep.runs {
                assert_eq!(r.probabilities, rep.clean);
                assert!(r.query_fidelity.iter().all(|&f| (f - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn study_is_deterministic_and_ordered() {
        let (db, queries) = digits();
        let cfg = NoiseConfig::new(EncodingScheme::Neqr, vec![3, 1, 2]);
        let a = run_noise_study(&db, &queries, &cfg).unwrap();
        let b = run_noise_study(&db, &queries, &cfg).unwrap();
        assert_eq!(a, b);
        let order: Vec<(f64, u64)> = a.runs.iter().map(|r| (r.sigma0, r.seed)).collect();
        assert_eq!(order[..3], [(0.05, 3), (0.05, 1), (0.05, 2)]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4 * 3 * 8 * 8);
    }

    #[test]
    fn pixel_noise_rejected_for_neqr() {
        let (db, queries) = digits();
        let cfg = NoiseConfig {
            target: Some(NoiseTarget::PixelIntensities),
            ..NoiseConfig::new(EncodingScheme::Neqr, vec![0])
        };
        assert!(run_noise_study(&db, &queries, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn perturbed_vectors_are_unit(raw in proptest::collection::vec(0.01f64..1.0, 16), sigma0 in 0.0f64..1.0, seed in 0u64..1000) {
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a: Vec<f64> = raw.iter().map(|x| x / n).collect();
            let b = perturb_amplitudes(&a, sigma0, &mut seeded_rng(seed, 0)).unwrap();
            prop_assert!((b.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
