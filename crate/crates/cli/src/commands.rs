//! Subcommand bodies. Each writes its tables into the output directory and
//! returns the list of files it produced.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qmatch_core::aae::{self, Ansatz, Estimator, TargetData, TrainConfig, TrainedParams};
use qmatch_core::dataset::DigitsSet;
use qmatch_core::encoding::{database_state, Database, EncodingScheme, ImageData};
use qmatch_core::fmt::g17;
use qmatch_core::grover::{grover_run, AnalyticCurve};
use qmatch_core::matcher::{
    build_matching_state, run_pipeline, AaeTraining, Iterations, MatchConfig, PrepMode, StatePrep,
};
use qmatch_core::noise::{run_noise_study, NoiseConfig, NoiseReport};
use qmatch_core::toy;
use serde_json::json;

use crate::args::{EncodeArgs, Format, MatchArgs, NoiseArgs, Prep, Resolved, ScanArgs, TrainArgs, TrainTarget};
use crate::svg;
use crate::UsageError;

const DIGIT_DATABASE: [u32; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

/// A database plus a way to look images up by name.
enum Dataset {
    Toy,
    Digits(DigitsSet),
}

impl Dataset {
    fn open(name: Option<&str>, default: &str) -> Result<Self> {
        match name.unwrap_or(default) {
            "toy16" => Ok(Dataset::Toy),
            "digits" => Ok(Dataset::Digits(DigitsSet::builtin())),
            path => {
                let set = DigitsSet::from_path(path).with_context(|| format!("loading dataset {path}"))?;
                Ok(Dataset::Digits(set))
            }
        }
    }

    fn database(&self) -> Result<Database> {
        Ok(match self {
            Dataset::Toy => toy::database(),
            Dataset::Digits(set) => set.database(&DIGIT_DATABASE)?,
        })
    }

    fn image(&self, name: &str) -> Result<ImageData> {
        match self {
            Dataset::Toy => Ok(toy::image(toy::parse_hex(name).map_err(|e| UsageError(e.to_string()))?)?),
            Dataset::Digits(set) => {
                let label: u32 = name
                    .trim()
                    .parse()
                    .map_err(|_| UsageError(format!("digit label expected, got {name:?}")))?;
                Ok(set.image(label)?.clone())
            }
        }
    }
}

fn scheme(name: Option<&str>) -> Result<EncodingScheme> {
    name.unwrap_or("frqi")
        .parse()
        .map_err(|e: qmatch_core::Error| UsageError(e.to_string()).into())
}

fn estimator(r: &Resolved) -> Estimator {
    match r.shots {
        None => Estimator::Exact,
        Some(shots) => Estimator::Shots { shots, seed: r.seed },
    }
}

fn check_shots(r: &Resolved) -> Result<()> {
    if r.shots == Some(0) {
        bail!(UsageError("--shots must be at least 1".into()));
    }
    Ok(())
}

struct Output<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: String) -> Result<()> {
        self.file(name, |b| {
            b.extend_from_slice(text.as_bytes());
            if !text.ends_with('\n') {
                b.push(b'\n');
            }
            Ok(())
        })
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

pub fn encode(args: EncodeArgs, r: &Resolved) -> Result<Vec<PathBuf>> {
    let data = Dataset::open(args.dataset.as_deref(), "toy16")?;
    let scheme = scheme(args.scheme.as_deref())?;
    let (state, what) = if args.database {
        (database_state(&data.database()?, scheme)?, "database".to_string())
    } else {
        let Some(name) = args.image.as_deref() else {
            bail!(UsageError("encode needs --image NAME or --database".into()));
        };
        (scheme.encode(&data.image(name)?)?, name.to_string())
    };
    let amps = state.real_parts();
    let probs = state.probabilities();
    let mut out = Output::new(&r.out)?;
    if r.wants(Format::Csv) {
        out.file("encode.csv", |b| {
            b.write_all(b"basis_index,amplitude,probability\n")?;
            for (i, (a, p)) in amps.iter().zip(&probs).enumerate() {
                b.write_all(csv_line(&[i.to_string(), g17(*a), g17(*p)]).as_bytes())?;
            }
            Ok(())
        })?;
    }
    if r.wants(Format::Json) {
        let v = json!({ "scheme": scheme, "encoded": what, "n_qubits": state.n_qubits(), "amplitudes": amps });
        out.text("encode.json", serde_json::to_string_pretty(&v)?)?;
    }
    if r.wants(Format::Svg) {
        let labels: Vec<String> = (0..probs.len()).map(|i| i.to_string()).collect();
        out.text("encode.svg", svg::bar_chart(&format!("{what} ({scheme:?})"), &labels, &probs))?;
    }
    Ok(out.written)
}

pub fn train_aae(args: TrainArgs, r: &Resolved) -> Result<Vec<PathBuf>> {
    check_shots(r)?;
    let data = Dataset::open(args.dataset.as_deref(), "toy16")?;
    let scheme = scheme(args.scheme.as_deref())?;
    let target_kind = args.target.unwrap_or(TrainTarget::Query);
    let state = match target_kind {
        TrainTarget::Query => {
            let Some(name) = args.image.as_deref() else {
                bail!(UsageError("train-aae --target query needs --image NAME".into()));
            };
            scheme.encode(&data.image(name)?)?
        }
        TrainTarget::Database => database_state(&data.database()?, scheme)?,
    };
    let target = TargetData::from_state(&state)?;
    let (mut config, layers) = match target_kind {
        TrainTarget::Query => (TrainConfig::query(r.seed), 3),
        TrainTarget::Database => (TrainConfig::database(r.seed), 6),
    };
    if let Some(i) = args.iterations {
        config.iterations = i;
    }
    if let Some(b) = args.bandwidth {
        config.bandwidth = b;
    }
    config.shots = r.shots;
    let layers = args.layers.unwrap_or(layers);
    let restarts = args.restarts.unwrap_or(1);
    if restarts == 0 {
        bail!(UsageError("--restarts must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..restarts as u64).map(|k| r.seed.wrapping_add(k)).collect();
    let shape = Ansatz::zeros(state.n_qubits(), layers)?;
    let (ansatz, report, seed) = aae::train_best_of(&target, &shape, &config, &seeds)?;
    let params = TrainedParams::new(&ansatz, seed, report.final_fidelity);

    let mut out = Output::new(&r.out)?;
    out.text("trained_params.json", params.to_json()?)?;
    if r.wants(Format::Csv) {
        out.file("train_loss.csv", |b| {
            b.write_all(b"iteration,loss\n")?;
            for (i, l) in report.loss_history.iter().enumerate() {
                b.write_all(csv_line(&[i.to_string(), g17(*l)]).as_bytes())?;
            }
            Ok(())
        })?;
    }
    if r.wants(Format::Json) {
        let v = json!({
            "seed": seed,
            "iterations": config.iterations,
            "final_loss": report.final_loss,
            "final_fidelity": report.final_fidelity,
            "wall_clock_secs": report.wall_clock_secs,
        });
        out.text("train_report.json", serde_json::to_string_pretty(&v)?)?;
    }
    if r.wants(Format::Svg) {
        let pts = report.loss_history.iter().enumerate().map(|(i, l)| (i as f64, *l)).collect();
        out.text("train_loss.svg", svg::line_chart("training loss", &[("loss".into(), pts)]))?;
    }
    Ok(out.written)
}

fn read_params(path: &Path) -> Result<TrainedParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TrainedParams::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn match_cmd(args: MatchArgs, r: &Resolved) -> Result<Vec<PathBuf>> {
    check_shots(r)?;
    let Some(query_name) = args.query.as_deref() else {
        bail!(UsageError("match needs --query NAME".into()));
    };
    if args.t.is_some() && args.auto_m.is_some() {
        bail!(UsageError("--t and --auto-m are mutually exclusive".into()));
    }
    let data = Dataset::open(args.dataset.as_deref(), "toy16")?;
    let database = data.database()?;
    let query = data.image(query_name)?;
    let prep = match (args.prep.unwrap_or(Prep::Ideal), &args.query_params, &args.database_params) {
        (Prep::Ideal, None, None) => PrepMode::Ideal,
        (Prep::Ideal, _, _) => bail!(UsageError("encoder parameters need --prep aae".into())),
        (Prep::Aae, Some(q), Some(d)) => PrepMode::AaeTrained {
            database: read_params(d)?,
            query: read_params(q)?,
        },
        (Prep::Aae, None, None) => PrepMode::AaeTrain(AaeTraining {
            query: TrainConfig::query(r.seed),
            database: TrainConfig::database(r.seed),
            seeds: vec![r.seed],
            ..AaeTraining::default()
        }),
        (Prep::Aae, _, _) => bail!(UsageError("give both --query-params and --database-params".into())),
    };
    let threshold = args.threshold.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&threshold) {
        bail!(UsageError(format!("--threshold {threshold} outside [0, 1]")));
    }
    let config = MatchConfig {
        scheme: scheme(args.scheme.as_deref())?,
        prep,
        estimator: estimator(r),
        iterations: match args.auto_m {
            Some(m) => Iterations::Auto { m },
            None => Iterations::Fixed(args.t.unwrap_or(0)),
        },
        threshold,
    };
    let result = run_pipeline(&database, &query, &config)?;
    let report = &result.report;

    let mut out = Output::new(&r.out)?;
    if r.wants(Format::Csv) {
        out.file("match.csv", |b| Ok(report.write_csv(b)?))?;
    }
    if r.wants(Format::Json) {
        let v = json!({
            "query": query_name,
            "report": report,
            "match_index": report.match_index(),
            "closest_index": report.closest_index(),
            "candidates": result.candidates,
            "encoder_fidelity": result.encoder_fidelity,
        });
        out.text("match.json", serde_json::to_string_pretty(&v)?)?;
    }
    if r.wants(Format::Svg) {
        let mut labels = report.labels.clone();
        labels.push("others".into());
        let mut values = report.probabilities.clone();
        values.push(report.others);
        let title = format!("query {query_name}, t = {}", report.iterations);
        out.text("match.svg", svg::bar_chart(&title, &labels, &values))?;
    }
    if let Some((db, q)) = &result.trained {
        out.text("database_params.json", db.to_json()?)?;
        out.text("query_params.json", q.to_json()?)?;
    }
    Ok(out.written)
}

pub fn grover_scan(args: ScanArgs, r: &Resolved) -> Result<Vec<PathBuf>> {
    check_shots(r)?;
    let Some(query_name) = args.query.as_deref() else {
        bail!(UsageError("grover-scan needs --query NAME".into()));
    };
    let (t_min, t_max) = (args.t_min.unwrap_or(0), args.t_max.unwrap_or(15));
    if t_min > t_max {
        bail!(UsageError(format!("--t-min {t_min} exceeds --t-max {t_max}")));
    }
    let data = Dataset::open(args.dataset.as_deref(), "toy16")?;
    let database = data.database()?;
    let query = data.image(query_name)?;
    let scheme = scheme(args.scheme.as_deref())?;
    let ops = build_matching_state(
        &StatePrep::State(database_state(&database, scheme)?),
        &StatePrep::State(scheme.encode(&query)?),
    )?;
    let curve = AnalyticCurve::from_state(ops.psi_prime(), ops.n_data())?;
    let block = 1usize << ops.n_data();
    let labels = database.labels();
    let hd: Option<Vec<u32>> = query.is_binary().then(|| {
        database.images().iter().map(|d| d.hamming_distance(&query).unwrap_or(u32::MAX)).collect()
    });
    let trajectory = grover_run(&ops, t_max)?;

    struct Row {
        t: usize,
        index: String,
        label: String,
        simulated: f64,
        analytic: f64,
        hd: String,
    }
    let mut rows = Vec::new();
    for t in t_min..=t_max {
        let probs = trajectory[t].probabilities();
        let simulated: Vec<f64> = match r.shots {
            None => (0..database.len()).map(|k| probs[k * block]).collect(),
            Some(shots) => {
                let seed = r.seed.wrapping_add(t as u64);
                let hist = trajectory[t].sample_counts(shots, seed)?;
                (0..database.len()).map(|k| hist.frequency(k * block)).collect()
            }
        };
        let mut sim_total = 0.0;
        let mut ana_total = 0.0;
        for k in 0..database.len() {
            let analytic = curve.hit_probability(k * block, t as f64)?;
            sim_total += simulated[k];
            ana_total += analytic;
            rows.push(Row {
                t,
                index: k.to_string(),
                label: labels[k].clone(),
                simulated: simulated[k],
                analytic,
                hd: hd.as_ref().map(|h| h[k].to_string()).unwrap_or_default(),
            });
        }
        rows.push(Row {
            t,
            index: "others".into(),
            label: "others".into(),
            simulated: 1.0 - sim_total,
            analytic: 1.0 - ana_total,
            hd: String::new(),
        });
    }

    let mut out = Output::new(&r.out)?;
    if r.wants(Format::Csv) {
        out.file("grover_scan.csv", |b| {
            b.write_all(b"t,index,label,simulated,analytic,hamming_distance\n")?;
            for row in &rows {
                let line = csv_line(&[
                    row.t.to_string(),
                    row.index.clone(),
                    row.label.clone(),
                    g17(row.simulated),
                    g17(row.analytic),
                    row.hd.clone(),
                ]);
                b.write_all(line.as_bytes())?;
            }
            Ok(())
        })?;
    }
    if r.wants(Format::Json) {
        let v = json!({
            "query": query_name,
            "beta": curve.beta,
            "omega": curve.omega,
            "t_min": t_min,
            "t_max": t_max,
            "curve": curve,
        });
        out.text("grover_scan.json", serde_json::to_string_pretty(&v)?)?;
    }
    if r.wants(Format::Svg) {
        let series: Vec<(String, Vec<(f64, f64)>)> = (0..database.len())
            .map(|k| {
                let pts = rows
                    .iter()
                    .filter(|row| row.index == k.to_string())
                    .map(|row| (row.t as f64, row.simulated))
                    .collect();
                (labels[k].clone(), pts)
            })
            .collect();
        out.text("grover_scan.svg", svg::line_chart(&format!("query {query_name}"), &series))?;
    }
    Ok(out.written)
}

pub fn noise_study(args: NoiseArgs, r: &Resolved) -> Result<Vec<PathBuf>> {
    let data = Dataset::open(args.dataset.as_deref(), "digits")?;
    let database = data.database()?;
    let queries = database.images().to_vec();
    let schemes: Vec<EncodingScheme> = if args.schemes.is_empty() {
        vec![EncodingScheme::Frqi, EncodingScheme::Neqr]
    } else {
        args.schemes.iter().map(|s| scheme(Some(s))).collect::<Result<_>>()?
    };
    let n_seeds = args.seeds.unwrap_or(20);
    if n_seeds == 0 {
        bail!(UsageError("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| r.seed.wrapping_add(k)).collect();
    let sigma0 = if args.sigma0.is_empty() {
        NoiseConfig::SIGMA0_GRID.to_vec()
    } else {
        args.sigma0.clone()
    };
    if sigma0.iter().any(|s| !(*s >= 0.0)) {
        bail!(UsageError("--sigma0 values must be non-negative".into()));
    }

    let reports: Vec<NoiseReport> = schemes
        .iter()
        .map(|&scheme| {
            let config = NoiseConfig {
                sigma0: sigma0.clone(),
                ..NoiseConfig::new(scheme, seeds.clone())
            };
            run_noise_study(&database, &queries, &config)
        })
        .collect::<qmatch_core::Result<_>>()?;

    let mut out = Output::new(&r.out)?;
    if r.wants(Format::Csv) {
        out.file("noise.csv", |b| {
            for (i, rep) in reports.iter().enumerate() {
                let mut part = Vec::new();
                rep.write_csv(&mut part)?;
                let text = String::from_utf8(part)?;
                let body = if i == 0 { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
                b.write_all(body.as_bytes())?;
            }
            Ok(())
        })?;
        out.file("noise_summary.csv", |b| {
            for (i, rep) in reports.iter().enumerate() {
                let mut part = Vec::new();
                rep.write_summary_csv(&mut part)?;
                let text = String::from_utf8(part)?;
                let body = if i == 0 { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
                b.write_all(body.as_bytes())?;
            }
            Ok(())
        })?;
    }
    if r.wants(Format::Json) {
        let parts: Vec<serde_json::Value> = reports
            .iter()
            .map(|rep| Ok(serde_json::from_str(&rep.summary_json()?)?))
            .collect::<Result<_>>()?;
        out.text("noise_summary.json", serde_json::to_string_pretty(&parts)?)?;
    }
    if r.wants(Format::Svg) {
        let series = reports
            .iter()
            .map(|rep| {
                let pts = rep.summary.iter().map(|s| (s.sigma0, s.mean_fidelity)).collect();
                (format!("{:?}", rep.scheme), pts)
            })
            .collect::<Vec<_>>();
        out.text("noise.svg", svg::line_chart("mean fidelity vs sigma0", &series))?;
    }
    Ok(out.written)
}
