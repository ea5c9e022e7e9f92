//! Command-line front end.
//!
//! ```text
//! geolatnet generate  --geometry G --nodes N [--config FILE] [--seed S] --out DIR
//! geolatnet fit mcmc  --edges FILE [--geometry G] [--config FILE] --out DIR [...]
//! geolatnet fit bbvi  --edges FILE [--geometry G] [--config FILE] --out DIR [...]
//! geolatnet predict   --fit DIR --edges FILE [--out DIR] [--burnin N] [--samples S]
//! ```
//!
//! Config files are flat `key = value` text; command-line flags override
//! them. Node ids in edge lists, CSV files and JSON summaries are 1-based.
//! Floating-point CSV fields carry 17 significant digits.

use crate::bbvi::{run_bbvi_with, BbviConfig, BbviError, BbviResult, NodeFactor, VariationalState};
use crate::data::{format_edge_list, parse_edge_list, ParseError};
use crate::evaluate::{
    posterior_predictive_probs, separation_stats, summarize_latent, variational_samples, EvaluateError,
    PosteriorSample, PredictiveRecord, SeparationStats, VI_PREDICTIVE_DRAWS,
};
use crate::geometry::{Geometry, LatentPoint};
use crate::identifiability::{AnchorSpec, IdentifiabilityError};
use crate::mcmc::{effective_sample_size, run_chains, AcceptanceRates, McmcConfig, McmcError, McmcTrace};
use crate::model::{default_theta_spread, sample_network, LatentConfiguration, Network, ThetaZ};
use crate::par::{compensated_sum, configure_threads_from_env, Execution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const TRACE_FILE: &str = "trace.csv";
const LATENT_FILE: &str = "latent.csv";
const ELBO_FILE: &str = "elbo.csv";
const STATE_FILE: &str = "state.json";
const MANIFEST_FILE: &str = "manifest.json";
const PREDICTIVE_FILE: &str = "predictive.csv";
const SEPARATION_FILE: &str = "separation.json";
const EDGES_FILE: &str = "edges.txt";
const TRUTH_FILE: &str = "truth.json";
const TRUTH_LATENT_FILE: &str = "truth_latent.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Data(format!("edge list: {e}"))
    }
}

impl From<IdentifiabilityError> for CliError {
    fn from(e: IdentifiabilityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<McmcError> for CliError {
    fn from(e: McmcError) -> Self {
        match e {
            McmcError::InvalidConfig(m) => CliError::Usage(m),
            McmcError::Distribution(d) => CliError::Numerical(d.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BbviError> for CliError {
    fn from(e: BbviError) -> Self {
        match e {
            BbviError::InvalidConfig(m) => CliError::Usage(m),
            BbviError::Diverged { .. } | BbviError::Distribution(_) => CliError::Numerical(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::Distribution(d) => CliError::Numerical(d.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "geolatnet", version, about = "Latent-space network models on the Poincaré disk and the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a network and its latent positions.
    Generate(GenerateArgs),
    /// Fit a model to an edge list.
    Fit {
        #[command(subcommand)]
        method: FitMethod,
    },
    /// Posterior-predictive link probabilities from a completed fit.
    Predict(PredictArgs),
}

#[derive(Debug, Subcommand)]
pub enum FitMethod {
    /// Metropolis-within-Gibbs sampling.
    Mcmc(FitArgs),
    /// Black-box variational inference.
    Bbvi(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryArg {
    Hyperbolic,
    Spherical,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Hyperbolic => Geometry::Hyperbolic,
            GeometryArg::Spherical => Geometry::Spherical,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Keep every n-th MCMC iteration.
    #[arg(long)]
    pub thin: Option<usize>,
    /// MCMC iterations excluded from reported summaries.
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Joint samples per BBVI gradient estimate.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Node count when trailing nodes are isolated.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Independent MCMC chains, written to `chain-1`, `chain-2`, ...
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Output directory of `fit mcmc` or `fit bbvi`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    /// Defaults to the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Draws from a variational fit.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nodes: Option<usize>,
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

const KNOWN_KEYS: &[&str] = &[
    "geometry",
    "nodes",
    "seed",
    "alpha",
    "theta_spread",
    "iterations",
    "thin",
    "burnin",
    "chains",
    "alpha_step",
    "latent_step",
    "alpha_prior_mean",
    "alpha_prior_sd",
    "update_theta_z",
    "update_prior_params",
    "anchors",
    "samples",
    "learning_rate",
    "rmsprop_decay",
    "rmsprop_epsilon",
    "tolerance",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("config line {line}: field `{key}`: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

/// Parsed `key = value` pairs with their line numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |key: &str, message: String| ConfigError { line, key: key.to_string(), message };
            let (key, value) = content.split_once('=').ok_or_else(|| err(content, "expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(key, "unknown field".into()));
            }
            if value.is_empty() {
                return Err(err(key, "missing value".into()));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line, value.to_string())) {
                return Err(err(key, format!("already set on line {first}")));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
                ConfigFile::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| ConfigError {
                line: *line,
                key: key.to_string(),
                message: format!("invalid value {v:?}: {e}"),
            }),
        }
    }

    fn geometry(&self) -> Result<Option<Geometry>, ConfigError> {
        match self.entries.get("geometry") {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "hyperbolic" => Ok(Some(Geometry::Hyperbolic)),
                "spherical" => Ok(Some(Geometry::Spherical)),
                _ => Err(ConfigError {
                    line: *line,
                    key: "geometry".into(),
                    message: format!("expected `hyperbolic` or `spherical`, found {v:?}"),
                }),
            },
        }
    }

    /// `anchors = i1,i2,i3` with 1-based ids.
    fn anchors(&self, n: usize) -> Result<Option<AnchorSpec>, ConfigError> {
        let Some((line, v)) = self.entries.get("anchors") else {
            return Ok(None);
        };
        let err = |message: String| ConfigError { line: *line, key: "anchors".into(), message };
        let ids: Vec<usize> = v
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("invalid node id in {v:?}: {e}")))?;
        match ids.as_slice() {
            &[a, b, c] if a >= 1 && b >= 1 && c >= 1 => {
                AnchorSpec::new(a - 1, b - 1, c - 1, n).map(Some).map_err(|e| err(e.to_string()))
            }
            _ => Err(err(format!("expected three 1-based node ids, found {v:?}"))),
        }
    }
}

fn usage(e: ConfigError) -> CliError {
    CliError::Usage(e.to_string())
}

fn resolve_geometry(flag: Option<GeometryArg>, config: &ConfigFile) -> Result<Geometry, CliError> {
    match (flag, config.geometry().map_err(usage)?) {
        (Some(g), _) => Ok(g.into()),
        (None, Some(g)) => Ok(g),
        (None, None) => Err(CliError::Usage("geometry must be given by --geometry or the config file".into())),
    }
}

fn mcmc_config(geometry: Geometry, config: &ConfigFile, args: &FitArgs, n: usize) -> Result<McmcConfig, CliError> {
    let mut c = McmcConfig::default_for(geometry);
    let u = usage;
    c.iterations = args.iterations.or(config.get("iterations").map_err(u)?).unwrap_or(c.iterations);
    c.thin = args.thin.or(config.get("thin").map_err(u)?).unwrap_or(c.thin);
    c.seed = args.seed.or(config.get("seed").map_err(u)?).unwrap_or(c.seed);
    c.alpha_step = config.get("alpha_step").map_err(u)?.unwrap_or(c.alpha_step);
    c.latent_step = config.get("latent_step").map_err(u)?.unwrap_or(c.latent_step);
    c.theta_spread = config.get("theta_spread").map_err(u)?.unwrap_or(c.theta_spread);
    c.priors.alpha_prior.m = config.get("alpha_prior_mean").map_err(u)?.unwrap_or(c.priors.alpha_prior.m);
    c.priors.alpha_prior.s = config.get("alpha_prior_sd").map_err(u)?.unwrap_or(c.priors.alpha_prior.s);
    c.update_theta_z = config.get("update_theta_z").map_err(u)?.unwrap_or(false);
    c.update_prior_params = config.get("update_prior_params").map_err(u)?.unwrap_or(false);
    c.anchors = config.anchors(n).map_err(u)?;
    c.validate()?;
    if !(c.priors.alpha_prior.s > 0.0) {
        return Err(CliError::Usage("alpha_prior_sd must be positive".into()));
    }
    Ok(c)
}

fn bbvi_config(geometry: Geometry, config: &ConfigFile, args: &FitArgs, n: usize) -> Result<BbviConfig, CliError> {
    let mut c = BbviConfig::default_for(geometry);
    let u = usage;
    c.iterations = args.iterations.or(config.get("iterations").map_err(u)?).unwrap_or(c.iterations);
    c.samples = args.samples.or(config.get("samples").map_err(u)?).unwrap_or(c.samples);
    c.seed = args.seed.or(config.get("seed").map_err(u)?).unwrap_or(c.seed);
    c.learning_rate = config.get("learning_rate").map_err(u)?.unwrap_or(c.learning_rate);
    c.rmsprop_decay = config.get("rmsprop_decay").map_err(u)?.unwrap_or(c.rmsprop_decay);
    c.rmsprop_epsilon = config.get("rmsprop_epsilon").map_err(u)?.unwrap_or(c.rmsprop_epsilon);
    c.theta_spread = config.get("theta_spread").map_err(u)?.unwrap_or(c.theta_spread);
    c.priors.alpha_prior.m = config.get("alpha_prior_mean").map_err(u)?.unwrap_or(c.priors.alpha_prior.m);
    c.priors.alpha_prior.s = config.get("alpha_prior_sd").map_err(u)?.unwrap_or(c.priors.alpha_prior.s);
    c.tolerance = config.get("tolerance").map_err(u)?;
    c.anchors = config.anchors(n).map_err(u)?;
    c.validate()?;
    if !(c.priors.alpha_prior.s > 0.0) {
        return Err(CliError::Usage("alpha_prior_sd must be positive".into()));
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn latent_header(geometry: Geometry) -> Vec<&'static str> {
    match geometry {
        Geometry::Hyperbolic => vec!["iter", "node", "c1", "c2"],
        Geometry::Spherical => vec!["iter", "node", "c1", "c2", "c3"],
    }
}

fn latent_rows(iter: usize, z: &[LatentPoint]) -> impl Iterator<Item = Vec<String>> + '_ {
    z.iter().enumerate().map(move |(i, p)| {
        let mut row = vec![iter.to_string(), (i + 1).to_string()];
        row.extend(p.coords().into_iter().map(fmt_f64));
        row
    })
}

fn read_network(path: &Path, nodes: Option<usize>) -> Result<(Network, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let y = parse_edge_list(&text, nodes)?;
    if y.node_count() < 3 {
        return Err(CliError::Data(format!(
            "{}: at least 3 nodes are needed, found {}",
            path.display(),
            y.node_count()
        )));
    }
    if y.edge_count() == 0 {
        return Err(CliError::Data(format!("{}: the network has no edges", path.display())));
    }
    let hash = sha256_hex(&format_edge_list(&y));
    Ok((y, hash))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    /// SHA-256 of the canonical edge-list text.
    pub sha256: String,
    pub nodes: usize,
    pub edges: usize,
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub geometry: Geometry,
    pub seed: u64,
    pub input: Option<InputRecord>,
    /// Resolved settings, including defaults.
    pub config: BTreeMap<String, String>,
    /// 1-based.
    pub anchors: Option<[usize; 3]>,
    pub chains: usize,
    pub burnin: usize,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

fn one_based(a: &AnchorSpec) -> [usize; 3] {
    [a.i1 + 1, a.i2 + 1, a.i3 + 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: usize,
    pub coords: Vec<f64>,
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcStateFile {
    pub geometry: Geometry,
    pub anchors: [usize; 3],
    pub burnin: usize,
    pub retained_samples: usize,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub alpha_ess: f64,
    pub acceptance_rates: AcceptanceRates,
    pub max_loglik_drift: f64,
    pub initial_stress: f64,
    /// Per-node Fréchet mean of the retained samples.
    pub latent_summary: Vec<NodeSummary>,
    pub final_state: LatentConfiguration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalNode {
    pub node: usize,
    /// `z̃_i`.
    pub location: Vec<f64>,
    /// `s̃_i`, `κ̃_i`, or the logit-scale sd of an axis node; 0 for `i1`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbviStateFile {
    pub geometry: Geometry,
    pub anchors: [usize; 3],
    pub m_tilde: f64,
    pub sigma_tilde: f64,
    pub iterations_run: usize,
    pub held_steps: usize,
    pub final_elbo: f64,
    pub initial_stress: f64,
    pub nodes: Vec<VariationalNode>,
    pub variational: VariationalState,
}

fn resolved_mcmc(c: &McmcConfig, burnin: usize) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("iterations", c.iterations.to_string());
    put("thin", c.thin.to_string());
    put("burnin", burnin.to_string());
    put("seed", c.seed.to_string());
    put("alpha_step", c.alpha_step.to_string());
    put("latent_step", c.latent_step.to_string());
    put("theta_spread", c.theta_spread.to_string());
    put("alpha_prior_mean", c.priors.alpha_prior.m.to_string());
    put("alpha_prior_sd", c.priors.alpha_prior.s.to_string());
    put("update_theta_z", c.update_theta_z.to_string());
    put("update_prior_params", c.update_prior_params.to_string());
    if let Some(a) = c.anchors {
        let [x, y, z] = one_based(&a);
        put("anchors", format!("{x},{y},{z}"));
    }
    m
}

fn resolved_bbvi(c: &BbviConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("iterations", c.iterations.to_string());
    put("samples", c.samples.to_string());
    put("seed", c.seed.to_string());
    put("learning_rate", c.learning_rate.to_string());
    put("rmsprop_decay", c.rmsprop_decay.to_string());
    put("rmsprop_epsilon", c.rmsprop_epsilon.to_string());
    put("theta_spread", c.theta_spread.to_string());
    put("alpha_prior_mean", c.priors.alpha_prior.m.to_string());
    put("alpha_prior_sd", c.priors.alpha_prior.s.to_string());
    if let Some(t) = c.tolerance {
        put("tolerance", t.to_string());
    }
    if let Some(a) = c.anchors {
        let [x, y, z] = one_based(&a);
        put("anchors", format!("{x},{y},{z}"));
    }
    m
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = configure_threads_from_env();
    match cli.command {
        Command::Generate(args) => cmd_generate(&args, threads),
        Command::Fit { method: FitMethod::Mcmc(args) } => cmd_fit_mcmc(&args, threads),
        Command::Fit { method: FitMethod::Bbvi(args) } => cmd_fit_bbvi(&args, threads),
        Command::Predict(args) => cmd_predict(&args),
    }
}

pub fn cmd_generate(args: &GenerateArgs, threads: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let config = ConfigFile::load(args.config.as_deref())?;
    let geometry = resolve_geometry(args.geometry, &config)?;
    let n = args
        .nodes
        .or(config.get("nodes").map_err(usage)?)
        .ok_or_else(|| CliError::Usage("node count must be given by --nodes or the config file".into()))?;
    let seed = args.seed.or(config.get("seed").map_err(usage)?).unwrap_or(0);
    let alpha: f64 = config.get("alpha").map_err(usage)?.unwrap_or(0.0);
    let spread: f64 = config.get("theta_spread").map_err(usage)?.unwrap_or(default_theta_spread(geometry));
    if !alpha.is_finite() {
        return Err(CliError::Usage("alpha must be finite".into()));
    }
    let theta = ThetaZ::centred(geometry, spread).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, truth) = sample_network(alpha, &theta, n, &mut rng).map_err(|e| CliError::Usage(e.to_string()))?;

    create_dir(&args.out)?;
    let edges_text = format_edge_list(&y);
    let edges_path = args.out.join(EDGES_FILE);
    fs::write(&edges_path, &edges_text).map_err(|e| io_error(&edges_path, e))?;
    write_json(&args.out.join(TRUTH_FILE), &truth)?;
    write_csv(&args.out.join(TRUTH_LATENT_FILE), &latent_header(geometry), latent_rows(0, &truth.z))?;
    let mut resolved = BTreeMap::new();
    resolved.insert("nodes".to_string(), n.to_string());
    resolved.insert("alpha".to_string(), alpha.to_string());
    resolved.insert("theta_spread".to_string(), spread.to_string());
    resolved.insert("seed".to_string(), seed.to_string());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "generate".into(),
        geometry,
        seed,
        input: None,
        config: resolved,
        anchors: None,
        chains: 0,
        burnin: 0,
        threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: vec![EDGES_FILE.into(), TRUTH_FILE.into(), TRUTH_LATENT_FILE.into()],
    };
    // timing stays out of the generated files so reruns are byte-identical
    let manifest = Manifest { wall_time_seconds: 0.0, ..manifest };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    println!("wrote {} nodes, {} edges to {}", n, y.edge_count(), args.out.display());
    Ok(())
}

fn write_mcmc_chain(dir: &Path, trace: &McmcTrace, burnin: usize) -> Result<McmcStateFile, CliError> {
    create_dir(dir)?;
    write_csv(
        &dir.join(TRACE_FILE),
        &["iter", "alpha", "loglik"],
        trace
            .iterations
            .iter()
            .zip(&trace.alpha_samples)
            .zip(&trace.loglik_samples)
            .map(|((it, a), ll)| vec![it.to_string(), fmt_f64(*a), fmt_f64(*ll)]),
    )?;
    write_csv(
        &dir.join(LATENT_FILE),
        &latent_header(trace.geometry),
        trace.iterations.iter().zip(&trace.z_samples).flat_map(|(it, z)| latent_rows(*it, z)),
    )?;
    let k0 = trace.first_after(burnin);
    if k0 >= trace.len() {
        return Err(CliError::Usage(format!(
            "burn-in of {burnin} iterations leaves no samples out of {}",
            trace.iterations.last().copied().unwrap_or(0)
        )));
    }
    let alphas = &trace.alpha_samples[k0..];
    let mean = trace.alpha_mean(burnin);
    let var = compensated_sum(alphas.iter().map(|a| (a - mean).powi(2))) / (alphas.len().max(2) - 1) as f64;
    let summary = summarize_latent(&trace.z_samples[k0..], Execution::default())?;
    let state = McmcStateFile {
        geometry: trace.geometry,
        anchors: one_based(&trace.anchors),
        burnin,
        retained_samples: alphas.len(),
        alpha_mean: mean,
        alpha_sd: var.sqrt(),
        alpha_ess: effective_sample_size(alphas),
        acceptance_rates: trace.acceptance_rates,
        max_loglik_drift: trace.max_loglik_drift,
        initial_stress: trace.initial_stress,
        latent_summary: summary
            .iter()
            .enumerate()
            .map(|(i, s)| NodeSummary { node: i + 1, coords: s.mean.coords(), dispersion: s.dispersion })
            .collect(),
        final_state: trace.configuration(trace.len() - 1),
    };
    write_json(&dir.join(STATE_FILE), &state)?;
    Ok(state)
}

pub fn cmd_fit_mcmc(args: &FitArgs, threads: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let config = ConfigFile::load(args.config.as_deref())?;
    let geometry = resolve_geometry(args.geometry, &config)?;
    let (y, hash) = read_network(&args.edges, args.nodes.or(config.get("nodes").map_err(usage)?))?;
    let cfg = mcmc_config(geometry, &config, args, y.node_count())?;
    let chains = args.chains.or(config.get("chains").map_err(usage)?).unwrap_or(1);
    if chains == 0 {
        return Err(CliError::Usage("chains must be at least 1".into()));
    }
    let burnin = args.burnin.or(config.get("burnin").map_err(usage)?).unwrap_or(cfg.iterations / 2);
    let traces = run_chains(&y, geometry, &cfg, chains, Execution::default())?;

    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    for (k, trace) in traces.iter().enumerate() {
        let (dir, prefix) = if chains == 1 {
            (args.out.clone(), String::new())
        } else {
            let name = format!("chain-{}", k + 1);
            (args.out.join(&name), format!("{name}/"))
        };
        let state = write_mcmc_chain(&dir, trace, burnin)?;
        for f in [TRACE_FILE, LATENT_FILE, STATE_FILE] {
            outputs.push(format!("{prefix}{f}"));
        }
        println!(
            "chain {}: posterior mean alpha {:.4} (sd {:.4}, ESS {:.0}), acceptance alpha {:.3} latent {:.3}",
            k + 1,
            state.alpha_mean,
            state.alpha_sd,
            state.alpha_ess,
            state.acceptance_rates.alpha,
            state.acceptance_rates.latent
        );
    }
    outputs.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "fit mcmc".into(),
        geometry,
        seed: cfg.seed,
        input: Some(InputRecord {
            path: args.edges.display().to_string(),
            sha256: hash,
            nodes: y.node_count(),
            edges: y.edge_count(),
        }),
        config: resolved_mcmc(&cfg, burnin),
        anchors: Some(one_based(&traces[0].anchors)),
        chains,
        burnin,
        threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)
}

fn bbvi_state_file(result: &BbviResult) -> BbviStateFile {
    let st = &result.state;
    let tail = result.elbo_trace.len().min(50);
    let final_elbo = compensated_sum(result.elbo_trace[result.elbo_trace.len() - tail..].iter().copied()) / tail as f64;
    BbviStateFile {
        geometry: st.geometry,
        anchors: one_based(&st.anchors),
        m_tilde: st.m_tilde,
        sigma_tilde: st.sigma_tilde(),
        iterations_run: result.iterations_run,
        held_steps: result.held_steps,
        final_elbo,
        initial_stress: result.initial_stress,
        nodes: st
            .nodes
            .iter()
            .enumerate()
            .map(|(i, f)| VariationalNode {
                node: i + 1,
                location: f.location().coords(),
                spread: match f {
                    NodeFactor::Fixed { .. } => 0.0,
                    _ => f.spread(),
                },
            })
            .collect(),
        variational: st.clone(),
    }
}

pub fn cmd_fit_bbvi(args: &FitArgs, threads: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let config = ConfigFile::load(args.config.as_deref())?;
    let geometry = resolve_geometry(args.geometry, &config)?;
    let (y, hash) = read_network(&args.edges, args.nodes.or(config.get("nodes").map_err(usage)?))?;
    let cfg = bbvi_config(geometry, &config, args, y.node_count())?;
    let result = run_bbvi_with(&y, geometry, &cfg, Execution::default())?;

    create_dir(&args.out)?;
    write_csv(
        &args.out.join(ELBO_FILE),
        &["iter", "elbo", "loglik", "m_tilde", "sigma_tilde"],
        result.elbo_trace.iter().zip(&result.loglik_trace).zip(&result.alpha_trace).enumerate().map(
            |(k, ((e, ll), (m, s)))| vec![(k + 1).to_string(), fmt_f64(*e), fmt_f64(*ll), fmt_f64(*m), fmt_f64(*s)],
        ),
    )?;
    let state = bbvi_state_file(&result);
    write_json(&args.out.join(STATE_FILE), &state)?;
    println!(
        "m_tilde {:.4}, sigma_tilde {:.4}, final ELBO {:.3} after {} iterations",
        state.m_tilde, state.sigma_tilde, state.final_elbo, state.iterations_run
    );
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "fit bbvi".into(),
        geometry,
        seed: cfg.seed,
        input: Some(InputRecord {
            path: args.edges.display().to_string(),
            sha256: hash,
            nodes: y.node_count(),
            edges: y.edge_count(),
        }),
        config: resolved_bbvi(&cfg),
        anchors: Some(state.anchors),
        chains: 1,
        burnin: 0,
        threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: vec![ELBO_FILE.into(), STATE_FILE.into(), MANIFEST_FILE.into()],
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)
}

/// Reads `trace.csv` and `latent.csv` of one chain back into samples.
pub fn read_mcmc_samples(
    dir: &Path,
    geometry: Geometry,
    n: usize,
    burnin: usize,
) -> Result<Vec<PosteriorSample>, CliError> {
    let trace_path = dir.join(TRACE_FILE);
    let latent_path = dir.join(LATENT_FILE);
    let bad = |p: &Path, m: String| CliError::Data(format!("{}: {m}", p.display()));
    let mut samples: Vec<(usize, PosteriorSample)> = Vec::new();
    let mut rdr = csv::Reader::from_path(&trace_path).map_err(|e| io_error(&trace_path, e))?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_error(&trace_path, e))?;
        let it: usize = rec[0].parse().map_err(|e| bad(&trace_path, format!("iter: {e}")))?;
        let alpha: f64 = rec[1].parse().map_err(|e| bad(&trace_path, format!("alpha: {e}")))?;
        samples.push((it, PosteriorSample { alpha, z: Vec::with_capacity(n) }));
    }
    let dims = geometry.coordinate_count();
    let mut rdr = csv::Reader::from_path(&latent_path).map_err(|e| io_error(&latent_path, e))?;
    let mut k = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_error(&latent_path, e))?;
        if rec.len() != 2 + dims {
            return Err(bad(&latent_path, format!("expected {} columns, found {}", 2 + dims, rec.len())));
        }
        let it: usize = rec[0].parse().map_err(|e| bad(&latent_path, format!("iter: {e}")))?;
        while k < samples.len() && samples[k].0 != it {
            k += 1;
        }
        let Some((_, sample)) = samples.get_mut(k) else {
            return Err(bad(&latent_path, format!("iteration {it} missing from {TRACE_FILE}")));
        };
        let c: Vec<f64> = (2..2 + dims)
            .map(|j| rec[j].parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(&latent_path, format!("coordinate: {e}")))?;
        let p = match geometry {
            Geometry::Hyperbolic => crate::geometry::DiskPoint::new(c[0], c[1]).map(LatentPoint::Disk),
            Geometry::Spherical => crate::geometry::SpherePoint::new([c[0], c[1], c[2]]).map(LatentPoint::Sphere),
        }
        .map_err(|e| bad(&latent_path, e.to_string()))?;
        sample.z.push(p);
    }
    if samples.iter().any(|(_, s)| s.z.len() != n) {
        return Err(bad(&latent_path, format!("every iteration needs {n} nodes")));
    }
    Ok(samples.into_iter().filter(|(it, _)| *it > burnin).map(|(_, s)| s).collect())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let manifest: Manifest = read_json(&args.fit.join(MANIFEST_FILE))?;
    let (y, hash) = read_network(&args.edges, args.nodes)?;
    if let Some(input) = &manifest.input {
        if input.sha256 != hash {
            eprintln!("warning: edge list differs from the one recorded in the fit manifest");
        }
    }
    let n = y.node_count();
    let samples = match manifest.command.as_str() {
        "fit mcmc" => {
            let burnin = args.burnin.unwrap_or(manifest.burnin);
            let dirs: Vec<PathBuf> = if manifest.chains <= 1 {
                vec![args.fit.clone()]
            } else {
                (1..=manifest.chains).map(|k| args.fit.join(format!("chain-{k}"))).collect()
            };
            let mut all = Vec::new();
            for d in dirs {
                all.extend(read_mcmc_samples(&d, manifest.geometry, n, burnin)?);
            }
            all
        }
        "fit bbvi" => {
            let state: BbviStateFile = read_json(&args.fit.join(STATE_FILE))?;
            if state.variational.nodes.len() != n {
                return Err(CliError::Data(format!(
                    "fit has {} nodes, edge list has {n}",
                    state.variational.nodes.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed.unwrap_or(manifest.seed));
            variational_samples(&state.variational, args.samples.unwrap_or(VI_PREDICTIVE_DRAWS), &mut rng)?
        }
        other => return Err(CliError::Data(format!("{}: not a fit directory ({other})", args.fit.display()))),
    };
    if samples.is_empty() {
        return Err(CliError::Usage("no posterior samples remain after burn-in".into()));
    }
    let records = posterior_predictive_probs(&y, &samples, Execution::default())?;
    let out = args.out.clone().unwrap_or_else(|| args.fit.clone());
    create_dir(&out)?;
    write_predictive(&out.join(PREDICTIVE_FILE), &records)?;
    match separation_stats(&records) {
        Ok(s) => {
            write_json(&out.join(SEPARATION_FILE), &s)?;
            print_separation(&s, samples.len());
        }
        Err(e) => eprintln!("warning: {e}"),
    }
    Ok(())
}

fn write_predictive(path: &Path, records: &[PredictiveRecord]) -> Result<(), CliError> {
    write_csv(
        path,
        &["i", "j", "y", "mean_p"],
        records
            .iter()
            .map(|r| vec![(r.i + 1).to_string(), (r.j + 1).to_string(), u8::from(r.y).to_string(), fmt_f64(r.mean_p)]),
    )
}

fn print_separation(s: &SeparationStats, samples: usize) {
    println!(
        "{samples} samples: mean p over links {:.4}, over non-links {:.4}, AUC {:.4}",
        s.mean_p_link, s.mean_p_nonlink, s.auc
    );
}
