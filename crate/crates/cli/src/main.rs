//! `candy`: simulate the recoloring automaton, compute exact instability
//! tables and contraction certificates, and cross-check the two.
//!
//! Exit codes: 0 success, 1 check failure, 2 invalid arguments,
//! 3 corrupt checkpoint or state file.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use candy_core::crosscheck::{crosscheck, select_windows, CrosscheckError, Selection};
use candy_core::exact::{certify, compute_tables, Backend, Certificate, EngineOptions, ExactError, ProbTables, Symmetry};
use candy_core::lattice::{Boundary, ConfigurationFile};
use candy_core::montecarlo::{
    run_experiment, survival_from, write_aggregate_csv, write_jsonl, ExperimentManifest, ExperimentSpec, Exterior,
    InitialCondition, MonteCarloError,
};
use candy_core::params::{parse_distribution, ModelParams};

use manifest::Run;

const EXIT_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_STATE: u8 = 3;

#[derive(Parser)]
#[command(name = "candy", version, about = "Recoloring automaton toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trajectories until fixation.
    Simulate(SimulateArgs),
    /// Compute the exact pI, pIII and pS tables for k steps.
    Enumerate(EnumerateArgs),
    /// Compute the contraction certificate for k steps.
    Certify(CertifyArgs),
    /// Compare Monte Carlo estimates with exact k-step probabilities.
    Crosscheck(CrosscheckArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Lattice dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Number of colors (default: length of --p, else 2).
    #[arg(long)]
    n: Option<usize>,
    /// Minimum chain length that makes a site unstable.
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    /// Recoloring distribution, comma separated (`1/2,1/2` or `0.25,0.75`; default uniform).
    #[arg(long)]
    p: Option<String>,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, String> {
        let result = match &self.p {
            Some(p) => {
                let dist = parse_distribution(p).map_err(|e| e.to_string())?;
                ModelParams::new(self.d, self.n.unwrap_or(dist.len()), self.kappa, dist)
            }
            None => ModelParams::uniform(self.d, self.n.unwrap_or(2), self.kappa),
        };
        result.map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "CANDY_OUT_DIR", default_value = "candy-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Frozen,
    Periodic,
    StableExterior,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExteriorArg {
    Inert,
    Chessboard,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Initial condition: `word:<digits>`, `block` (random unstable block of
    /// half-width --M), `box` (uniform colors on --shape) or `file:<path>`.
    #[arg(long)]
    init: String,
    /// Half-width of the random unstable block.
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    /// Box extents for `--init box`, comma separated.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    /// Boundary policy (default: stable-exterior when d = 1, frozen otherwise).
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Exterior beyond an explicit word under the stable-exterior boundary.
    #[arg(long, value_enum, default_value = "inert")]
    exterior: ExteriorArg,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long = "t-max", default_value_t = candy_core::montecarlo::DEFAULT_T_MAX)]
    t_max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Bitmask,
    Generic,
}

#[derive(Args)]
struct EngineArgs {
    /// Step count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    /// Recoloring distribution (must be dyadic).
    #[arg(long)]
    p: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    /// Disable color and reflection symmetry reductions.
    #[arg(long)]
    no_symmetry: bool,
    /// Single-threaded enumeration.
    #[arg(long)]
    serial: bool,
    /// Checkpoint file; an interrupted run resumes from it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl EngineArgs {
    fn model(&self) -> ModelArgs {
        ModelArgs { d: 1, n: Some(self.n), kappa: self.kappa, p: self.p.clone() }
    }

    fn options(&self) -> EngineOptions {
        EngineOptions {
            parallel: !self.serial,
            symmetry: if self.no_symmetry { Symmetry::NONE } else { Symmetry::ALL },
            backend: match self.backend {
                BackendArg::Auto => Backend::Auto,
                BackendArg::Bitmask => Backend::Bitmask,
                BackendArg::Generic => Backend::Generic,
            },
            checkpoint: self.checkpoint.clone(),
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({"k": self.k, "n": self.n, "kappa": self.kappa, "p": self.p})
    }
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Reuse tables written by `enumerate` (JSON).
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Fail instead of computing tables when --tables is absent.
    #[arg(long)]
    no_compute: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CrosscheckArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Monte Carlo runs per window.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// `all` or a number of random window classes.
    #[arg(long, default_value = "all")]
    windows: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allowed deviation in standard errors.
    #[arg(long, default_value_t = 4.0)]
    tolerance: f64,
    #[command(flatten)]
    out: OutArgs,
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn usage(message: impl Into<String>) -> Failure {
    fail(EXIT_USAGE, message)
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        fail(EXIT_CHECK, format!("i/o error: {e}"))
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        let code = match e {
            ExactError::Checkpoint(_) => EXIT_STATE,
            ExactError::ZeroSteps
            | ExactError::Dimension(_)
            | ExactError::NonDyadic
            | ExactError::TooLarge(_)
            | ExactError::Unsupported(_)
            | ExactError::CertificateKappa(_) => EXIT_USAGE,
            _ => EXIT_CHECK,
        };
        fail(code, e.to_string())
    }
}

impl From<MonteCarloError> for Failure {
    fn from(e: MonteCarloError) -> Self {
        let code = match e {
            MonteCarloError::Spec(_) | MonteCarloError::Lattice(_) => EXIT_USAGE,
            _ => EXIT_CHECK,
        };
        fail(code, e.to_string())
    }
}

impl From<CrosscheckError> for Failure {
    fn from(e: CrosscheckError) -> Self {
        match e {
            CrosscheckError::Exact(e) => e.into(),
            CrosscheckError::MonteCarlo(e) => e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Crosscheck(a) => crosscheck_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn initial_condition(a: &SimulateArgs, params: &ModelParams) -> Result<InitialCondition, Failure> {
    let exterior = match a.exterior {
        ExteriorArg::Inert => Exterior::Inert,
        ExteriorArg::Chessboard => Exterior::Chessboard,
    };
    if let Some(word) = a.init.strip_prefix("word:") {
        return Ok(InitialCondition::ExplicitWord { word: word.to_string(), exterior });
    }
    if let Some(path) = a.init.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
        let file: ConfigurationFile =
            serde_json::from_str(&text).map_err(|e| fail(EXIT_STATE, format!("corrupt configuration {path}: {e}")))?;
        let (config, file_params) = file.into_parts().map_err(|e| fail(EXIT_STATE, format!("{path}: {e}")))?;
        if config.dimension() != params.dimension() || file_params.kappa() != params.kappa() {
            return Err(usage(format!("{path} does not match --d/--kappa")));
        }
        return Ok(InitialCondition::ExplicitBox { shape: config.shape().to_vec(), cells: config.cells().to_vec() });
    }
    match a.init.as_str() {
        "block" => Ok(InitialCondition::RandomUnstableBlock { m: a.m }),
        "box" if a.shape.is_empty() => Err(usage("--init box needs --shape")),
        "box" => Ok(InitialCondition::UniformRandomBox { shape: a.shape.clone() }),
        other => Err(usage(format!("unknown --init `{other}` (expected word:<digits>, block, box or file:<path>)"))),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let params = a.model.params().map_err(usage)?;
    let initial = initial_condition(&a, &params)?;
    let boundary = match a.boundary {
        Some(BoundaryArg::Frozen) => Boundary::Frozen,
        Some(BoundaryArg::Periodic) => Boundary::Periodic,
        Some(BoundaryArg::StableExterior) => Boundary::StableExterior,
        None if params.dimension() == 1 => Boundary::StableExterior,
        None => Boundary::Frozen,
    };
    let spec = ExperimentSpec { params, initial, boundary, t_max: a.t_max, trials: a.trials, seed: a.seed };
    spec.validate()?;
    let parameters = serde_json::to_value(&spec).expect("spec serializes");
    let mut run = Run::start(&a.out.out, "simulate", parameters, Some(spec.seed))?;
    let stats = run_experiment(&spec, true)?;

    let mut jsonl = Vec::new();
    write_jsonl(&stats, &mut jsonl)?;
    let mut csv = Vec::new();
    write_aggregate_csv(&stats, &mut csv)?;
    let experiment = ExperimentManifest::new(&spec, &stats);
    let jsonl_path = run.write("jsonl", &jsonl)?;
    let csv_path = run.write("csv", &csv)?;
    let mut exp_json = serde_json::to_vec_pretty(&experiment).expect("manifest serializes");
    exp_json.push(b'\n');
    run.write("experiment.json", &exp_json)?;

    if experiment.exploratory {
        println!("note: parameters outside the proven fixation setting; results are exploratory");
    }
    for s in stats.iter().take(10) {
        match s.fixation_time {
            Some(t) => println!("trial {}: fixation_time {t} (I_0 = {})", s.trial, s.i_series[0]),
            None => println!("trial {}: no fixation by t = {} (I_0 = {})", s.trial, spec.t_max, s.i_series[0]),
        }
    }
    let times: Vec<u64> = stats.iter().filter_map(|s| s.fixation_time).collect();
    println!("fixated: {}/{}", times.len(), stats.len());
    if let Some(max) = times.iter().max() {
        let mean = times.iter().sum::<u64>() as f64 / times.len() as f64;
        println!("fixation time: mean {mean:.3}, max {max}");
    }
    let curve = survival_from(&stats);
    if let Some((t, _)) = curve.iter().find(|(_, f)| *f == 0.0) {
        println!("survival reaches 0 at t = {t}");
    }
    println!("wrote {} and {}", jsonl_path.display(), csv_path.display());
    run.finish()?;
    Ok(())
}

fn warn_large_k(k: u64) {
    if k > 4 {
        eprintln!("warning: k = {k} needs roughly 2^{} window words and may exhaust time or memory", 4 * k + 7);
    }
}

fn enumerate(a: EnumerateArgs) -> Result<(), Failure> {
    let params = a.engine.model().params().map_err(usage)?;
    warn_large_k(a.engine.k);
    let mut run = Run::start(&a.out.out, "enumerate", a.engine.describe(), None)?;
    let tables = compute_tables(&params, a.engine.k as usize, &a.engine.options())?;
    let mut json = serde_json::to_vec_pretty(&tables).expect("tables serialize");
    json.push(b'\n');
    let text = tables.to_text();
    let json_path = run.write("json", &json)?;
    run.write("txt", text.as_bytes())?;
    print!("{text}");
    println!("\nwrote {}", json_path.display());
    run.finish()?;
    Ok(())
}

fn load_tables(path: &Path, k: u64) -> Result<ProbTables, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let tables: ProbTables =
        serde_json::from_str(&text).map_err(|e| fail(EXIT_STATE, format!("corrupt tables {}: {e}", path.display())))?;
    tables.validate().map_err(|e| fail(EXIT_STATE, format!("{}: {e}", path.display())))?;
    if tables.k as u64 != k {
        return Err(usage(format!("{} holds tables for k = {}, not {k}", path.display(), tables.k)));
    }
    Ok(tables)
}

fn certify_cmd(a: CertifyArgs) -> Result<(), Failure> {
    let params = a.engine.model().params().map_err(usage)?;
    let k = a.engine.k;
    let cert = match &a.tables {
        Some(path) => {
            if params.kappa() != 3 {
                return Err(ExactError::CertificateKappa(params.kappa()).into());
            }
            Certificate::from_tables(load_tables(path, k)?)?
        }
        None if a.no_compute => return Err(usage("--no-compute given without --tables")),
        None => {
            warn_large_k(k);
            certify(&params, k as usize, &a.engine.options())?
        }
    };
    let mut run = Run::start(&a.out.out, "certify", a.engine.describe(), None)?;
    let mut json = serde_json::to_vec_pretty(&cert.to_json()).expect("certificate serializes");
    json.push(b'\n');
    let path = run.write("json", &json)?;
    println!("{cert}");
    if cert.contraction() {
        println!("CONTRACTION: c < 1");
    } else {
        println!("no contraction: c >= 1");
    }
    println!("wrote {}", path.display());
    run.finish()?;
    Ok(())
}

fn crosscheck_cmd(a: CrosscheckArgs) -> Result<(), Failure> {
    let params = ModelParams::theorem();
    let selection = match a.windows.as_str() {
        "all" => Selection::All,
        n => Selection::Random(n.parse().ok().filter(|&c| c > 0).ok_or_else(|| usage(format!("bad --windows `{n}`")))?),
    };
    if !(a.tolerance > 0.0) {
        return Err(usage("--tolerance must be positive"));
    }
    let k = a.k as usize;
    warn_large_k(a.k);
    let parameters = json!({"k": a.k, "samples": a.samples, "windows": a.windows, "seed": a.seed, "tolerance": a.tolerance});
    let mut run = Run::start(&a.out.out, "crosscheck", parameters, Some(a.seed))?;
    let windows = select_windows(&params, k, selection, a.seed)?;
    let rows = crosscheck(&params, k, &windows, a.samples, a.seed, a.tolerance)?;
    let mut report = Vec::new();
    for r in &rows {
        let line = json!({
            "window": r.window,
            "class": r.class,
            "exact": r.exact.to_string(),
            "frequency": r.estimate.frequency(),
            "delta": r.estimate.frequency() - r.exact.to_f64(),
            "z": if r.z.is_finite() { json!(r.z) } else { json!("inf") },
            "pass": r.pass,
        });
        report.extend(serde_json::to_vec(&line).expect("row serializes"));
        report.push(b'\n');
    }
    let path = run.write("jsonl", &report)?;
    let failures: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
    let worst = rows.iter().map(|r| r.z).fold(0.0, f64::max);
    println!("{} windows, {} samples each, worst deviation {worst:.2} SE", rows.len(), a.samples);
    for r in &failures {
        println!(
            "FAIL window {} (class {}): exact {} frequency {:.6} ({:.2} SE)",
            r.window,
            r.class,
            r.exact.to_fraction_string(),
            r.estimate.frequency(),
            r.z
        );
    }
    println!("wrote {}", path.display());
    run.finish()?;
    if failures.is_empty() {
        println!("PASS");
        Ok(())
    } else {
        Err(fail(EXIT_CHECK, format!("{} of {} windows outside {} SE", failures.len(), rows.len(), a.tolerance)))
    }
}
