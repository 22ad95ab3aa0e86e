//! Command-line front end: argument model, command implementations and exit
//! code mapping. `main.rs` only parses and dispatches.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use regevlab::circuit::{build_full, InitMode, Method};
use regevlab::costmodel::{self, CostPoint};
use regevlab::lattice::{self, LatticeError};
use regevlab::pebble::{self, Strategy};
use regevlab::simulator::{self, NoiseSpec, OutcomeDistribution};
use regevlab::{derive_params, FactoringParams, ParamOverrides, Sample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NO_FACTOR: i32 = 3;

/// Default config file looked up in the working directory.
pub const CONFIG_FILE: &str = "regevlab.json";
/// Probabilities at or below this are dropped from distribution dumps.
pub const DUMP_FLOOR: f64 = 1e-15;

#[derive(Debug, Parser)]
#[command(name = "regevlab", version, about = "Space-optimized multidimensional factoring workbench")]
pub struct Cli {
    /// Seed for every random choice; falls back to the config file, then 0.
    #[arg(long, global = true, env = "REGEVLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// JSON config file; `./regevlab.json` is used when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cost tables from generated schedules and closed forms.
    Estimate(EstimateArgs),
    /// Emit (and optionally verify) a pebbling schedule.
    Schedule(ScheduleArgs),
    /// Build, simulate and sample a small circuit.
    Simulate(SimulateArgs),
    /// Recover factors from a samples file.
    Postprocess(PostprocessArgs),
    /// End-to-end factoring with simulated samples.
    Factor(FactorArgs),
    /// Exact outcome distribution by direct summation.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("preset").args(["table2", "tradeoff", "shor_compare"])))]
pub struct EstimateArgs {
    #[arg(long)]
    pub table2: bool,
    /// Pareto frontier of registers vs multiplications for `--m`.
    #[arg(long)]
    pub tradeoff: bool,
    #[arg(long)]
    pub shor_compare: bool,
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Strategy names such as `direct`, `simple`, `simple:k=4`, `kary:k=3`.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    /// Arity for `simple` or `kary` given without a parameter.
    #[arg(long)]
    pub k: Option<usize>,
    /// Add closed-form rows next to the measured ones.
    #[arg(long)]
    pub bounds: bool,
    #[arg(long = "C", default_value_t = costmodel::DEFAULT_C)]
    pub c: f64,
    #[arg(long = "n-bits", value_delimiter = ',')]
    pub n_bits: Vec<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("arity").args(["k", "ell"])))]
pub struct ScheduleArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value = "direct")]
    pub strategy: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    /// Re-validate the emitted schedule and print its cost.
    #[arg(long)]
    pub verify: bool,
}

/// Instance selection shared by the circuit commands.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long = "N")]
    pub n: u64,
    #[arg(long = "D")]
    pub grid: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub bases: Option<Vec<u64>>,
    #[arg(long = "S")]
    pub scale: Option<u64>,
    #[arg(long)]
    pub num_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Precompute,
    Sqmul,
}

#[derive(Debug, Clone, Args)]
pub struct CircuitArgs {
    #[arg(long, value_enum, default_value_t = MethodName::Precompute)]
    pub method: MethodName,
    /// Pebbling strategy for `sqmul`.
    #[arg(long, default_value = "direct")]
    pub strategy: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// `uniform` or `gaussian:T` with `T` exactly prepared top qubits.
    #[arg(long, default_value = "uniform", value_parser = parse_init)]
    pub init: InitMode,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Number of shots; 0 dumps the exact distribution.
    #[arg(long, default_value_t = 4096)]
    pub shots: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_p: f64,
    #[arg(long, default_value_t = 64)]
    pub trajectories: usize,
    /// Also write `num_samples` draws in the samples-file format.
    #[arg(long)]
    pub emit_samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long = "N")]
    pub n: u64,
    #[arg(long, value_delimiter = ',')]
    pub bases: Option<Vec<u64>>,
    #[arg(long = "S")]
    pub scale: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FactorArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub circuit: CircuitArgs,
}

fn parse_init(s: &str) -> Result<InitMode, String> {
    match s.split_once(':') {
        None if s == "uniform" => Ok(InitMode::Uniform),
        None if s == "gaussian" => Ok(InitMode::GaussianTop(1)),
        Some(("gaussian", t)) => t.parse().map(InitMode::GaussianTop).map_err(|e| format!("{t:?}: {e}")),
        _ => Err(format!("unknown init mode {s:?}")),
    }
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
    NoFactor(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::NoFactor(_) => EXIT_NO_FACTOR,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
            CliError::NoFactor(m) => write!(f, "no factor found: {m}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

/// Contents of `regevlab.json`. Keys mirror the global flags; `params`
/// holds instance overrides applied under any explicit flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub params: ParamOverrides,
}

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None if Path::new(CONFIG_FILE).is_file() => PathBuf::from(CONFIG_FILE),
        None => return Ok(Config::default()),
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub defaults: ParamOverrides,
}

/// Everything a command produced: the primary output and extra lines for
/// stdout (always printed, even with `--output`).
#[derive(Debug, Default)]
pub struct Report {
    pub body: String,
    pub notes: Vec<String>,
}

pub fn run(cli: Cli) -> Result<Report, CliError> {
    let config = load_config(cli.config.as_deref())?;
    let ctx = RunConfig {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        format: cli.format.or(config.format).unwrap_or(Format::Csv),
        output: cli.output,
        defaults: config.params,
    };
    let report = match &cli.command {
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Schedule(a) => cmd_schedule(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Postprocess(a) => cmd_postprocess(&ctx, a),
        Command::Factor(a) => cmd_factor(&ctx, a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
    }?;
    if let Some(path) = &ctx.output {
        write_atomic(path, report.body.as_bytes())?;
    }
    Ok(report)
}

/// Prints a report the way the binary does.
pub fn emit(report: &Report, to_stdout: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    if to_stdout {
        out.write_all(report.body.as_bytes())?;
    }
    for line in &report.notes {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn cost_rows(ctx: &RunConfig, rows: &[CostPoint]) -> anyhow::Result<String> {
    match ctx.format {
        Format::Csv => {
            let mut buf = Vec::new();
            costmodel::write_cost_csv(&mut buf, rows)?;
            Ok(String::from_utf8(buf)?)
        }
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
    }
}

fn with_k(s: Strategy, k: Option<usize>) -> Strategy {
    match (s, k) {
        (Strategy::Simple(None), Some(k)) => Strategy::Simple(Some(k)),
        _ => s,
    }
}

pub fn cmd_estimate(ctx: &RunConfig, a: &EstimateArgs) -> Result<Report, CliError> {
    if a.table2 {
        return Ok(Report { body: cost_rows(ctx, &costmodel::table2().map_err(anyhow::Error::from)?)?, notes: vec![] });
    }
    if a.tradeoff {
        let &[m] = a.m.as_slice() else {
            return Err(usage("--tradeoff needs exactly one --m"));
        };
        let rows = costmodel::tradeoff_frontier(m).map_err(anyhow::Error::from)?;
        return Ok(Report { body: cost_rows(ctx, &rows)?, notes: vec![] });
    }
    if a.shor_compare {
        let ns = if a.n_bits.is_empty() { costmodel::SHOR_COMPARE_N.to_vec() } else { a.n_bits.clone() };
        if !(a.c.is_finite() && a.c > 0.0) {
            return Err(usage(format!("--C must be positive, got {}", a.c)));
        }
        let rows = costmodel::shor_comparison(&ns, a.c).map_err(anyhow::Error::from)?;
        let body = match ctx.format {
            Format::Csv => {
                let mut buf = Vec::new();
                costmodel::write_shor_csv(&mut buf, &rows).map_err(anyhow::Error::from)?;
                String::from_utf8(buf).map_err(anyhow::Error::from)?
            }
            Format::Json => serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)? + "\n",
        };
        return Ok(Report { body, notes: vec![] });
    }
    if a.m.is_empty() {
        return Err(usage("give --m, or one of --table2, --tradeoff, --shor-compare"));
    }
    let strategies: Vec<Strategy> = if a.strategy.is_empty() {
        vec![Strategy::Direct, Strategy::Simple(a.k), Strategy::Binary]
    } else {
        a.strategy.iter().map(|&s| with_k(s, a.k)).collect()
    };
    let rows = costmodel::scaling_table(&a.m, &strategies, a.bounds).map_err(|e| usage(e))?;
    Ok(Report { body: cost_rows(ctx, &rows)?, notes: vec![] })
}

fn parse_strategy(name: &str, k: Option<usize>) -> Result<Strategy, CliError> {
    if name.contains(':') {
        name.parse().map_err(usage)
    } else {
        Strategy::from_parts(name, k).map_err(usage)
    }
}

pub fn cmd_schedule(ctx: &RunConfig, a: &ScheduleArgs) -> Result<Report, CliError> {
    let strategy = match (a.strategy.as_str(), a.k, a.ell) {
        ("variable", _, Some(ell)) => Strategy::Variable(ell),
        ("variable", _, None) => return Err(usage("variable needs --ell")),
        (name, k, _) => parse_strategy(name, k)?,
    };
    let schedule = strategy.schedule(a.m).map_err(usage)?;
    let mut notes = Vec::new();
    let cost = pebble::validate(&schedule).map_err(anyhow::Error::from)?;
    if a.verify {
        pebble::validate_reversed(&schedule).map_err(anyhow::Error::from)?;
        notes.push(cost.to_string());
    }
    let body = match ctx.format {
        Format::Csv => schedule.to_text(),
        Format::Json => serde_json::to_string_pretty(&json!({ "schedule": schedule, "cost": cost })).map_err(anyhow::Error::from)? + "\n",
    };
    Ok(Report { body, notes })
}

pub fn resolve_params(ctx: &RunConfig, inst: &InstanceArgs) -> Result<FactoringParams, CliError> {
    let mut o = ctx.defaults.clone();
    if let Some(g) = inst.grid {
        o.grid = Some(g);
    }
    if let Some(b) = &inst.bases {
        o.d = Some(b.len());
        o.bases = Some(b.clone());
    }
    if let Some(s) = inst.scale {
        o.scale = Some(s);
    }
    if let Some(m) = inst.num_samples {
        o.num_samples = Some(m);
    }
    derive_params(inst.n, &o).map_err(usage)
}

pub fn resolve_method(c: &CircuitArgs) -> Result<Method, CliError> {
    Ok(match c.method {
        MethodName::Precompute => Method::Precompute,
        MethodName::Sqmul => Method::SquareMultiply(parse_strategy(&c.strategy, c.k)?),
    })
}

fn exact_or_noisy(params: &FactoringParams, method: Method, init: InitMode, noise: &NoiseSpec) -> anyhow::Result<OutcomeDistribution> {
    let circuit = build_full(params, method, init)?;
    Ok(simulator::noisy_distribution::<f64>(&circuit, noise)?)
}

fn dump_distribution(ctx: &RunConfig, dist: &OutcomeDistribution) -> anyhow::Result<String> {
    let map: BTreeMap<String, f64> = dist.to_map().into_iter().filter(|&(_, p)| p > DUMP_FLOOR).collect();
    match ctx.format {
        Format::Json => Ok(serde_json::to_string_pretty(&map)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["bitstring", "probability"])?;
            for (b, p) in &map {
                w.write_record([b.as_str(), &format!("{p:.15e}")])?;
            }
            Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
        }
    }
}

fn dump_counts(ctx: &RunConfig, counts: &BTreeMap<String, u64>) -> anyhow::Result<String> {
    match ctx.format {
        Format::Json => Ok(serde_json::to_string_pretty(counts)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["bitstring", "count"])?;
            for (b, c) in counts {
                w.write_record([b.as_str(), &c.to_string()])?;
            }
            Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
        }
    }
}

pub fn cmd_simulate(ctx: &RunConfig, a: &SimulateArgs) -> Result<Report, CliError> {
    let params = resolve_params(ctx, &a.instance)?;
    let method = resolve_method(&a.circuit)?;
    if !(0.0..=1.0).contains(&a.noise_p) {
        return Err(usage(format!("--noise-p must lie in [0, 1], got {}", a.noise_p)));
    }
    let noise = NoiseSpec { p: a.noise_p, seed: ctx.seed, trajectories: a.trajectories };
    let dist = exact_or_noisy(&params, method, a.circuit.init, &noise)?;
    let body = if a.shots == 0 {
        dump_distribution(ctx, &dist)?
    } else {
        let shots = simulator::sample(&dist, a.shots, ctx.seed).map_err(anyhow::Error::from)?;
        dump_counts(ctx, &simulator::counts(&dist, &shots))?
    };
    let mut notes = Vec::new();
    if let Some(path) = &a.emit_samples {
        let samples = simulator::draw_samples(&dist, &params, ctx.seed).map_err(anyhow::Error::from)?;
        let mut buf = Vec::new();
        lattice::write_samples(&mut buf, params.d, params.grid, &samples).map_err(anyhow::Error::from)?;
        write_atomic(path, &buf)?;
        notes.push(format!("wrote {} samples to {}", samples.len(), path.display()));
    }
    Ok(Report { body, notes })
}

fn factor_line(n: u64, (p, q): (u64, u64)) -> String {
    format!("{n} = {p} × {q}")
}

fn factor_body(ctx: &RunConfig, n: u64, f: (u64, u64), trials: Option<usize>) -> anyhow::Result<String> {
    Ok(match ctx.format {
        Format::Csv => {
            let mut s = factor_line(n, f) + "\n";
            if let Some(t) = trials {
                s += &format!("trials: {t}\n");
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json!({ "N": n, "factors": [f.0, f.1], "trials": trials }))? + "\n",
    })
}

pub fn cmd_postprocess(ctx: &RunConfig, a: &PostprocessArgs) -> Result<Report, CliError> {
    let file = fs::File::open(&a.samples).with_context(|| format!("opening {}", a.samples.display()))?;
    let (d, grid, samples) = lattice::read_samples(BufReader::new(file)).map_err(anyhow::Error::from)?;
    let inst = InstanceArgs { n: a.n, grid: Some(grid), bases: a.bases.clone(), scale: a.scale, num_samples: None };
    let params = resolve_params(ctx, &inst)?;
    if params.d != d {
        return Err(usage(format!("samples have dimension {d} but N = {} uses d = {}", a.n, params.d)));
    }
    match lattice::postprocess(&samples, &params) {
        Ok(f) => Ok(Report { body: factor_body(ctx, a.n, f, None)?, notes: vec![] }),
        Err(LatticeError::NoFactorFound { tested }) => Err(CliError::NoFactor(format!("{tested} candidates tested"))),
        Err(e) => Err(CliError::Runtime(e.into())),
    }
}

/// One factoring attempt: exact distribution, `num_samples` draws under
/// `seed`, then lattice post-processing.
pub fn factor_trial(params: &FactoringParams, dist: &OutcomeDistribution, seed: u64) -> anyhow::Result<Option<(u64, u64)>> {
    let samples: Vec<Sample> = simulator::draw_samples(dist, params, seed)?;
    match lattice::postprocess(&samples, params) {
        Ok(f) => Ok(Some(f)),
        Err(LatticeError::NoFactorFound { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_factor(ctx: &RunConfig, a: &FactorArgs) -> Result<Report, CliError> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let params = resolve_params(ctx, &a.instance)?;
    let method = resolve_method(&a.circuit)?;
    let circuit = build_full(&params, method, a.circuit.init).map_err(anyhow::Error::from)?;
    let dist = simulator::control_distribution::<f64>(&circuit).map_err(anyhow::Error::from)?;
    for t in 0..a.trials {
        if let Some(f) = factor_trial(&params, &dist, ctx.seed.wrapping_add(t as u64))? {
            return Ok(Report { body: factor_body(ctx, params.n_value, f, Some(t + 1))?, notes: vec![] });
        }
    }
    Err(CliError::NoFactor(format!("{} trials exhausted", a.trials)))
}

pub fn cmd_oracle(ctx: &RunConfig, a: &OracleArgs) -> Result<Report, CliError> {
    let params = resolve_params(ctx, &a.instance)?;
    // the oracle does not depend on the modexp architecture; still reject bad names
    resolve_method(&a.circuit)?;
    let dist = simulator::analytic_oracle::<f64>(&params, a.circuit.init).map_err(|e| usage(e))?;
    Ok(Report { body: dump_distribution(ctx, &dist)?, notes: vec![] })
}
