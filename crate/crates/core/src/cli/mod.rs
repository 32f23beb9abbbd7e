//! The `bmapf` command-line driver.
//!
//! Every command reads a JSON configuration (`--config`), writes CSV/SVG
//! artifacts into `--out`, and records a `<command>.meta.json` sidecar with the
//! configuration hash, seed and crate version. Exit status is 0 on success, 1
//! on runtime or numerical failure, 2 on usage or input errors.

mod plot;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bench::{self, ExperimentConfig, ExperimentKind};
use crate::bmapf::{self, BmapfConfig, ResampleSource};
use crate::bo::BoConfig;
use crate::bomsd::{self, DEFAULT_DESIGN_PARTICLES};
use crate::error::Error;
use crate::io;
use crate::models::{self, InitialState, LinearGaussianModel, StateSpaceModel};
use crate::par;

#[derive(Debug, Parser)]
#[command(name = "bmapf", version, about = "Model-averaged particle filtering with designed model sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and write `t,x,y` CSV.
    Simulate(CommonArgs),
    /// Design a model set from historical observations.
    Design(CommonArgs),
    /// Run the model-averaged filter over an observation file.
    Filter(CommonArgs),
    /// Run a simulation study and write per-run and aggregate CSVs.
    Bench(CommonArgs),
    /// Render SVG charts from an aggregate CSV.
    Plot(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Parse { .. } | Error::OutOfDomain { .. } | Error::InvalidArgument(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs the command, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Runs a parsed command; returns lines meant for standard output.
pub fn run(cli: Cli) -> CliResult<Vec<String>> {
    let (Command::Simulate(args)
    | Command::Design(args)
    | Command::Filter(args)
    | Command::Bench(args)
    | Command::Plot(args)) = &cli.command;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        par::set_threads(n);
    }
    let raw = fs::read(&args.config)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.config.display())))?;
    let ctx = Context {
        raw: &raw,
        base_dir: args.config.parent().unwrap_or(Path::new("")).to_path_buf(),
        out: args.out.clone(),
        seed_override: args.seed,
    };
    fs::create_dir_all(&ctx.out).map_err(|e| CliError::usage(format!("{}: {e}", ctx.out.display())))?;
    match &cli.command {
        Command::Simulate(_) => cmd_simulate(&ctx),
        Command::Design(_) => cmd_design(&ctx),
        Command::Filter(_) => cmd_filter(&ctx),
        Command::Bench(_) => cmd_bench(&ctx),
        Command::Plot(_) => cmd_plot(&ctx),
    }
}

struct Context<'a> {
    raw: &'a [u8],
    base_dir: PathBuf,
    out: PathBuf,
    seed_override: Option<u64>,
}

impl Context<'_> {
    fn parse<T: for<'de> Deserialize<'de>>(&self) -> CliResult<T> {
        serde_json::from_slice(self.raw).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))
    }

    fn seed(&self, configured: u64) -> u64 {
        self.seed_override.unwrap_or(configured)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_meta(&self, command: &str, seed: u64, outputs: &[PathBuf]) -> CliResult<()> {
        let hash = Sha256::digest(self.raw);
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        let names: Vec<String> = outputs
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
        let meta = serde_json::json!({
            "command": command,
            "config_sha256": hex,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "parallel": par::is_parallel(),
            "outputs": names,
        });
        let path = self.out_path(&format!("{command}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).expect("static json") + "\n";
        fs::write(&path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ThetaInput {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ThetaInput {
    fn into_vec(self) -> Vec<f64> {
        match self {
            ThetaInput::Scalar(x) => vec![x],
            ThetaInput::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearGaussianParams {
    #[serde(default = "one")]
    q: f64,
    #[serde(default = "one")]
    r: f64,
    #[serde(default)]
    x0_mean: f64,
    #[serde(default = "one")]
    x0_var: f64,
}

fn one() -> f64 {
    1.0
}

/// Model name plus the optional linear-Gaussian settings.
#[derive(Debug, Clone, Deserialize)]
struct ModelSection {
    model: String,
    #[serde(default)]
    linear_gaussian: Option<LinearGaussianParams>,
}

impl ModelSection {
    fn build(&self) -> CliResult<Box<dyn StateSpaceModel>> {
        match self.model.as_str() {
            "linear_gaussian" => {
                let p = self.linear_gaussian.clone().unwrap_or(LinearGaussianParams {
                    q: 1.0,
                    r: 1.0,
                    x0_mean: 0.0,
                    x0_var: 1.0,
                });
                if !(p.x0_var >= 0.0) {
                    return Err(CliError::usage("x0_var must be non-negative"));
                }
                let x0 = if p.x0_var == 0.0 {
                    InitialState::Fixed(p.x0_mean)
                } else {
                    InitialState::Normal {
                        mean: p.x0_mean,
                        var: p.x0_var,
                    }
                };
                Ok(Box::new(LinearGaussianModel::new(p.q, p.r)?.with_initial(x0)))
            }
            name => models::by_name(name).ok_or_else(|| {
                CliError::usage(format!(
                    "unknown model `{name}` (expected exp1, exp2 or linear_gaussian)"
                ))
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SimulateConfig {
    #[serde(flatten)]
    model: ModelSection,
    theta: ThetaInput,
    #[serde(rename = "T")]
    steps: usize,
    #[serde(default)]
    seed: u64,
}

fn cmd_simulate(ctx: &Context) -> CliResult<Vec<String>> {
    let cfg: SimulateConfig = ctx.parse()?;
    if cfg.steps == 0 {
        return Err(CliError::usage("T must be at least 1"));
    }
    let model = cfg.model.build()?;
    let seed = ctx.seed(cfg.seed);
    let traj = models::simulate(model.as_ref(), &cfg.theta.into_vec(), cfg.steps, seed)?;
    let path = ctx.out_path("trajectory.csv");
    io::write_trajectory(&path, &traj)?;
    ctx.write_meta("simulate", seed, std::slice::from_ref(&path))?;
    Ok(vec![path.display().to_string()])
}

#[derive(Debug, Deserialize)]
struct InlineSimulation {
    theta: ThetaInput,
    #[serde(rename = "T")]
    steps: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct DesignConfig {
    #[serde(flatten)]
    model: ModelSection,
    #[serde(default)]
    data: Option<String>,
    #[serde(default)]
    simulate: Option<InlineSimulation>,
    #[serde(rename = "K")]
    k: usize,
    #[serde(default)]
    bo: BoConfig,
    #[serde(default = "default_design_particles")]
    n_particles: usize,
    #[serde(default)]
    seed: u64,
}

fn default_design_particles() -> usize {
    DEFAULT_DESIGN_PARTICLES
}

fn cmd_design(ctx: &Context) -> CliResult<Vec<String>> {
    let cfg: DesignConfig = ctx.parse()?;
    let model = cfg.model.build()?;
    let seed = ctx.seed(cfg.seed);
    let observations = match (&cfg.data, cfg.simulate) {
        (Some(p), None) => io::read_observations(&ctx.resolve(p))?.observations,
        (None, Some(sim)) => {
            if sim.steps == 0 {
                return Err(CliError::usage("T must be at least 1"));
            }
            models::simulate(model.as_ref(), &sim.theta.into_vec(), sim.steps, sim.seed)?.observations
        }
        _ => return Err(CliError::usage("design needs exactly one of `data` or `simulate`")),
    };
    if cfg.k == 0 {
        return Err(CliError::usage("K must be at least 1"));
    }
    let set = bomsd::design_model_set(model.as_ref(), &observations, cfg.k, &cfg.bo, cfg.n_particles, seed)
        .map_err(|e| match e {
            Error::PlanTooShort { m, k } => {
                CliError::runtime(format!("cannot design {k} components from m = {m} observations (need m >= K)"))
            }
            other => other.into(),
        })?;
    let mut outputs = vec![ctx.out_path("model_set.csv")];
    io::write_model_set(&outputs[0], &set)?;
    for c in &set.components {
        let p = ctx.out_path(&format!("bo_history_k{}.csv", c.k));
        io::write_bo_history(&p, &c.search)?;
        outputs.push(p);
    }
    ctx.write_meta("design", seed, &outputs)?;
    Ok(vec![outputs[0].display().to_string()])
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum SourceInput {
    #[default]
    GlobalMixture,
    PerModel,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ParticleInput {
    Same(usize),
    PerModel(Vec<usize>),
}

#[derive(Debug, Deserialize)]
struct FilterConfig {
    #[serde(flatten)]
    model: ModelSection,
    observations: String,
    #[serde(default)]
    thetas: Option<Vec<ThetaInput>>,
    #[serde(default)]
    model_set: Option<String>,
    #[serde(default, rename = "K")]
    k: Option<usize>,
    #[serde(default = "default_filter_particles")]
    n_particles: ParticleInput,
    #[serde(default)]
    resample_source: SourceInput,
    #[serde(default)]
    seed: u64,
}

fn default_filter_particles() -> ParticleInput {
    ParticleInput::Same(200)
}

fn cmd_filter(ctx: &Context) -> CliResult<Vec<String>> {
    let cfg: FilterConfig = ctx.parse()?;
    let model = cfg.model.build()?;
    let seed = ctx.seed(cfg.seed);
    let thetas: Vec<Vec<f64>> = match (cfg.thetas, &cfg.model_set) {
        (Some(t), None) => t.into_iter().map(ThetaInput::into_vec).collect(),
        (None, Some(p)) => io::read_model_set(&ctx.resolve(p))?,
        _ => return Err(CliError::usage("filter needs exactly one of `thetas` or `model_set`")),
    };
    if thetas.is_empty() {
        return Err(CliError::usage("at least one model parameter is required"));
    }
    if let Some(k) = cfg.k {
        if k != thetas.len() {
            return Err(CliError::usage(format!(
                "K = {k} but {} parameter values were given",
                thetas.len()
            )));
        }
    }
    let k = thetas.len();
    let n_per_model = match cfg.n_particles {
        ParticleInput::Same(n) => vec![n; k],
        ParticleInput::PerModel(v) if v.len() == k => v,
        ParticleInput::PerModel(v) => {
            return Err(CliError::usage(format!("{} particle counts for {k} models", v.len())))
        }
    };
    let obs = io::read_observations(&ctx.resolve(&cfg.observations))?;
    let bcfg = BmapfConfig {
        n_per_model,
        ..BmapfConfig::uniform(1, k)
    }
    .with_source(match cfg.resample_source {
        SourceInput::GlobalMixture => ResampleSource::GlobalMixture,
        SourceInput::PerModel => ResampleSource::PerModel,
    });
    let run = bmapf::run(model.as_ref(), &thetas, &obs.observations, &bcfg, seed)?;
    let est = ctx.out_path("estimates.csv");
    let diag = ctx.out_path("diagnostics.csv");
    io::write_estimates(&est, &run)?;
    io::write_diagnostics(&diag, &run)?;
    ctx.write_meta("filter", seed, &[est.clone(), diag.clone()])?;
    let mut lines = vec![est.display().to_string(), diag.display().to_string()];
    if let Some(states) = &obs.states {
        lines.push(format!("mse {}", bench::mse(&run.estimates, states)?));
    }
    Ok(lines)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFileConfig {
    experiment: ExperimentKind,
    #[serde(default, rename = "K_values")]
    k_values: Option<Vec<usize>>,
    #[serde(default, rename = "Po_values")]
    po_values: Option<Vec<f64>>,
    #[serde(default)]
    runs: Option<usize>,
    #[serde(default, rename = "T")]
    t_len: Option<usize>,
    #[serde(default)]
    m_hist: Option<usize>,
    #[serde(default)]
    n_particles: Option<usize>,
    #[serde(default)]
    design_particles: Option<usize>,
    #[serde(default)]
    bo: Option<BoConfig>,
    #[serde(default)]
    root_seed: Option<u64>,
}

impl BenchFileConfig {
    fn resolve(self) -> ExperimentConfig {
        let base = ExperimentConfig::preset(self.experiment);
        ExperimentConfig {
            experiment: self.experiment,
            k_values: self.k_values.unwrap_or(base.k_values),
            po_values: self.po_values.unwrap_or(base.po_values),
            runs: self.runs.unwrap_or(base.runs),
            t_len: self.t_len.unwrap_or(base.t_len),
            m_hist: self.m_hist.unwrap_or(base.m_hist),
            n_particles: self.n_particles.unwrap_or(base.n_particles),
            design_particles: self.design_particles.unwrap_or(base.design_particles),
            bo: self.bo.unwrap_or(base.bo),
            root_seed: self.root_seed.unwrap_or(base.root_seed),
        }
    }
}

fn cmd_bench(ctx: &Context) -> CliResult<Vec<String>> {
    let file: BenchFileConfig = ctx.parse()?;
    let mut cfg = file.resolve();
    cfg.root_seed = ctx.seed(cfg.root_seed);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let result = bench::run_experiment(&cfg)?;
    let runs = ctx.out_path("results.csv");
    let agg = ctx.out_path("aggregate.csv");
    io::write_run_records(&runs, &result.runs)?;
    io::write_cells(&agg, &result.cells)?;
    ctx.write_meta("bench", cfg.root_seed, &[runs.clone(), agg.clone()])?;
    let mut lines = vec![runs.display().to_string(), agg.display().to_string()];
    if cfg.experiment != ExperimentKind::LinearGaussianOracle {
        for c in result.cells.iter().filter(|c| c.method == bench::Method::Msd) {
            let p = result.paired_p_value(c.k, c.po);
            let cell = match c.po {
                Some(po) => format!("Po={po}"),
                None => format!("K={}", c.k),
            };
            lines.push(format!("{} {cell} paired p = {p:.3e}", cfg.experiment.label()));
        }
    }
    Ok(lines)
}

#[derive(Debug, Deserialize)]
struct PlotConfig {
    aggregate: String,
}

fn cmd_plot(ctx: &Context) -> CliResult<Vec<String>> {
    let cfg: PlotConfig = ctx.parse()?;
    let cells = io::read_cells(&ctx.resolve(&cfg.aggregate))?;
    if cells.is_empty() {
        return Err(CliError::runtime("aggregate CSV has no rows; nothing to plot"));
    }
    let mut outputs = Vec::new();
    let by = |label: &str| cells.iter().filter(|c| c.experiment == label).collect::<Vec<_>>();
    let exp1 = by("exp1");
    if !exp1.is_empty() {
        let p = ctx.out_path("exp1_mse_vs_k.svg");
        fs::write(&p, plot::mse_vs_k(&exp1)).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
        outputs.push(p);
    }
    let exp2 = by("exp2");
    if !exp2.is_empty() {
        let p = ctx.out_path("exp2_mse_vs_po.svg");
        fs::write(&p, plot::mse_vs_po(&exp2)).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
        outputs.push(p);
    }
    if outputs.is_empty() {
        return Err(CliError::runtime("aggregate CSV has no exp1 or exp2 rows"));
    }
    ctx.write_meta("plot", 0, &outputs)?;
    Ok(outputs.iter().map(|p| p.display().to_string()).collect())
}
