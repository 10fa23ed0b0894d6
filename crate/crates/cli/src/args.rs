//! Command-line flags and the JSON config file they override.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::UsageError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "qmatch", version, about = "Quantum image pattern matching by statevector simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// JSON config; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// Exact probabilities (the default).
    #[arg(long, global = true, conflicts_with = "shots")]
    pub exact: bool,
    /// Sample this many shots instead of exact probabilities.
    #[arg(long, global = true, value_name = "N")]
    pub shots: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the encoded state of an image or a whole database.
    Encode(EncodeArgs),
    /// Train an approximate amplitude encoder.
    TrainAae(TrainArgs),
    /// Run the matching pipeline and report the index distribution.
    Match(MatchArgs),
    /// Tabulate simulated and closed-form probabilities against iterations.
    GroverScan(ScanArgs),
    /// Encoding-noise fidelity sweep.
    NoiseStudy(NoiseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainTarget {
    Query,
    Database,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prep {
    Ideal,
    Aae,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeArgs {
    /// `toy16`, `digits`, or a digits CSV path.
    #[arg(long)]
    pub dataset: Option<String>,
    /// `frqi`, `neqr` or `ideal`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Image name: a toy hex name such as `Ah`, or a digit label.
    #[arg(long)]
    pub image: Option<String>,
    /// Encode the whole database instead of one image.
    #[arg(long)]
    pub database: bool,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, value_enum)]
    pub target: Option<TrainTarget>,
    /// Image to encode when training a query encoder.
    #[arg(long)]
    pub image: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Independent restarts; the best final fidelity is kept.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub query: Option<String>,
    /// Fixed number of amplification iterations.
    #[arg(long, conflicts_with = "auto_m")]
    pub t: Option<usize>,
    /// Pick the closest-integer optimum for peak `m`.
    #[arg(long, value_name = "M")]
    pub auto_m: Option<u32>,
    #[arg(long, value_enum)]
    pub prep: Option<Prep>,
    /// Trained query encoder (JSON); with `--prep aae`.
    #[arg(long, value_name = "PATH")]
    pub query_params: Option<PathBuf>,
    /// Trained database encoder (JSON); with `--prep aae`.
    #[arg(long, value_name = "PATH")]
    pub database_params: Option<PathBuf>,
    /// Similarity threshold for the candidate set.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub t_min: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    /// Schemes to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<String>,
    /// Relative noise scales, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma0: Vec<f64>,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub shots: Option<u64>,
    pub exact: Option<bool>,
    pub encode: Option<EncodeArgs>,
    pub train_aae: Option<TrainArgs>,
    #[serde(rename = "match")]
    pub match_: Option<MatchArgs>,
    pub grover_scan: Option<ScanArgs>,
    pub noise_study: Option<NoiseArgs>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        match cfg.schema_version {
            Some(SCHEMA_VERSION) => Ok(cfg),
            Some(v) => Err(UsageError(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")).into()),
            None => Err(UsageError("config is missing schema_version".into()).into()),
        }
    }
}

/// Settings shared by every command after merging flags over the config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub shots: Option<u64>,
}

impl Resolved {
    pub fn new(global: &GlobalArgs, file: &FileConfig) -> Self {
        let mut formats = if global.format.is_empty() {
            file.formats.clone().unwrap_or_else(|| vec![Format::Csv])
        } else {
            global.format.clone()
        };
        formats.sort();
        formats.dedup();
        let shots = if global.exact {
            None
        } else if global.shots.is_some() {
            global.shots
        } else if file.exact == Some(true) {
            None
        } else {
            file.shots
        };
        Self {
            seed: global.seed.or(file.seed).unwrap_or(0),
            out: global.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("qmatch-out")),
            formats,
            shots,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

macro_rules! merge_options {
    ($cli:expr, $file:expr; $($field:ident),* ; vecs: $($vec:ident),*) => {{
        let file = $file.unwrap_or_default();
        $( if $cli.$field.is_none() { $cli.$field = file.$field; } )*
        $( if $cli.$vec.is_empty() { $cli.$vec = file.$vec; } )*
    }};
}

impl EncodeArgs {
    pub fn merge(mut self, file: Option<EncodeArgs>) -> Self {
        let database = file.as_ref().is_some_and(|f| f.database);
        merge_options!(self, file; dataset, scheme, image; vecs:);
        self.database |= database;
        self
    }
}

impl TrainArgs {
    pub fn merge(mut self, file: Option<TrainArgs>) -> Self {
        merge_options!(self, file; dataset, scheme, target, image, layers, iterations, restarts, bandwidth; vecs:);
        self
    }
}

impl MatchArgs {
    pub fn merge(mut self, file: Option<MatchArgs>) -> Self {
        merge_options!(self, file; dataset, scheme, query, t, auto_m, prep, query_params, database_params, threshold; vecs:);
        self
    }
}

impl ScanArgs {
    pub fn merge(mut self, file: Option<ScanArgs>) -> Self {
        merge_options!(self, file; dataset, scheme, query, t_min, t_max; vecs:);
        self
    }
}

impl NoiseArgs {
    pub fn merge(mut self, file: Option<NoiseArgs>) -> Self {
        merge_options!(self, file; dataset, seeds; vecs: schemes, sigma0);
        self
    }
}
