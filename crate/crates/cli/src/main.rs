mod experiment;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpds_core::bounds::{classify_phase, query_complexity_bounds, BoundInputs, PhasePoint};
use qpds_core::detectors::{SearchMode, ThresholdMode};
use qpds_core::divergences::LogBase;
use qpds_core::harness::{estimate_risk, sweep, SweepOutput, MIN_RISK_TRIALS};
use qpds_core::Error;

use experiment::{DetectorKind, Overrides, StrategyKind};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QPDS_OUTPUT_DIR";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Parameter and configuration errors are usage errors; the rest are runtime.
fn classify(e: Error) -> CliError {
    match e {
        Error::Domain(_) | Error::DivergenceInfinite(_) | Error::Parameter(_) | Error::InfeasibleConfig(_) => {
            CliError::usage(e.to_string())
        }
        other => CliError::runtime(other.to_string()),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "qpds", version, about = "Query-limited planted dense subgraph detection experiments")]
struct Cli {
    /// Worker threads for Monte Carlo trials [default: all cores]; 1 runs serially
    #[arg(long, global = true, value_name = "COUNT")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Type-I/Type-II risk of one configuration and print it as JSON
    Simulate(SimulateArgs),
    /// Run a parameter grid from an experiment file, streaming CSV and JSON-lines records
    Sweep(SweepArgs),
    /// Print the query-complexity bounds for (n, k, p, q)
    Bounds(BoundsArgs),
    /// Classify an exponent point (alpha, beta) of the phase diagram
    Phase(PhaseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThresholdArg {
    ChernoffGamma,
    BernsteinMidpoint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SearchArg {
    Auto,
    Exact,
    LocalSearch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogBaseArg {
    #[value(alias = "e")]
    Natural,
    #[value(name = "2", alias = "base2")]
    Base2,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Natural => LogBase::Natural,
            LogBaseArg::Base2 => LogBase::Base2,
        }
    }
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    /// Number of vertices n [required unless in --config]
    #[arg(long)]
    n: Option<u32>,
    /// Planted subgraph size k, in vertices [required unless in --config]
    #[arg(long)]
    k: Option<u32>,
    /// Planted edge probability p, in [0, 1] [required unless in --config]
    #[arg(long)]
    p: Option<f64>,
    /// Noise edge probability q, in [0, 1] [required unless in --config]
    #[arg(long)]
    q: Option<f64>,
    /// Detector [required unless in --config]
    #[arg(long, value_enum)]
    detector: Option<DetectorKind>,
    /// Pattern size M: sampled vertices (scan) or probes (degree), in vertices
    #[arg(long = "M", alias = "m", value_name = "M")]
    m: Option<u32>,
    /// Degree-test panel size n', in vertices
    #[arg(long = "n-prime", value_name = "N_PRIME")]
    n_prime: Option<u32>,
    /// Detector slack epsilon, in (0, 1)
    #[arg(long = "eps", value_name = "EPS")]
    epsilon: Option<f64>,
    /// Scan threshold level gamma in [q, p] [default: 1 - 1/(2 C(N0,2)) if p = 1, else p - (p-q)/10]
    #[arg(long)]
    gamma: Option<f64>,
    /// Scan threshold rule [default: chernoff-gamma]
    #[arg(long, value_enum)]
    threshold_mode: Option<ThresholdArg>,
    /// Scan maximization [default: auto, exact up to 5e6 subsets]
    #[arg(long, value_enum)]
    search_mode: Option<SearchArg>,
    /// Log base of the degree count threshold [default: natural]
    #[arg(long, value_enum)]
    log_base: Option<LogBaseArg>,
    /// Query strategy run before non-pattern detectors [default: pattern]
    #[arg(long, value_enum)]
    strategy: Option<StrategyKind>,
    /// Greedy strategy fanout, in vertices
    #[arg(long)]
    fanout: Option<usize>,
    /// Query budget Q, in distinct pairs [default: the detector's pattern size]
    #[arg(long)]
    budget: Option<u64>,
    /// Charge every query call, repeats included, against the budget
    #[arg(long)]
    strict_budget: bool,
    /// Paired trials per hypothesis, at least 30 [required unless in --config]
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

impl ModelFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            k: self.k,
            p: self.p,
            q: self.q,
            detector: self.detector,
            m: self.m,
            n_prime: self.n_prime,
            epsilon: self.epsilon,
            gamma: self.gamma,
            threshold_mode: self.threshold_mode.map(|t| match t {
                ThresholdArg::ChernoffGamma => ThresholdMode::ChernoffGamma,
                ThresholdArg::BernsteinMidpoint => ThresholdMode::BernsteinMidpoint,
            }),
            search_mode: self.search_mode.map(|s| match s {
                SearchArg::Auto => SearchMode::Auto,
                SearchArg::Exact => SearchMode::Exact,
                SearchArg::LocalSearch => SearchMode::LocalSearch,
            }),
            log_base: self.log_base.map(Into::into),
            strategy: self.strategy,
            fanout: self.fanout,
            budget: self.budget,
            strict_budget: self.strict_budget,
            trials: self.trials,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment file (JSON); flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for relative output paths [default: $QPDS_OUTPUT_DIR, else the working directory]
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment file (JSON) with grid axes
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    /// CSV record file [default: sweep.csv]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON-lines record file [default: sweep.jsonl]
    #[arg(long)]
    jsonl: Option<PathBuf>,
    /// Resume manifest [default: sweep.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for relative output paths [default: $QPDS_OUTPUT_DIR, else the working directory]
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Number of vertices n
    #[arg(long)]
    n: u64,
    /// Planted subgraph size k, in vertices
    #[arg(long)]
    k: u64,
    /// Planted edge probability p
    #[arg(long)]
    p: f64,
    /// Noise edge probability q, in (0, 1)
    #[arg(long)]
    q: f64,
    /// Slack epsilon in [0, 2); 0 is the limiting constant
    #[arg(long = "eps", default_value_t = 0.0)]
    epsilon: f64,
    /// Adaptive confidence delta in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Constant C of the chi-square form of the scan condition
    #[arg(long = "C", alias = "c", default_value_t = 8.0)]
    c_const: f64,
    /// Constant of the degree-test budget
    #[arg(long, default_value_t = 1.0)]
    degree_const: f64,
    /// Slack epsilon0 of the minimum planted size
    #[arg(long, default_value_t = 0.0)]
    eps0: f64,
    /// Logarithm base of all log terms
    #[arg(long, value_enum, default_value = "natural")]
    log_base: LogBaseArg,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PhaseArgs {
    /// Budget exponent alpha, Q = n^alpha, in (0, 2)
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Planted-size exponent beta, k = n^beta, in (0, 1)
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
}

fn output_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn place(dir: &Path, path: &Path) -> Result<PathBuf, CliError> {
    let full = if path.is_absolute() { path.to_path_buf() } else { dir.join(path) };
    if let Some(parent) = full.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(full)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file = args.config.as_deref().map(experiment::load).transpose()?;
    if file.as_ref().is_some_and(|f| !f.grid.is_empty()) {
        return Err(CliError::usage("simulate takes a single configuration; use `sweep` for grids"));
    }
    let base = experiment::resolve(file.as_ref(), &args.model.overrides())?;
    let cfg = base.to_trial_config()?;
    cfg.validate().map_err(classify)?;
    if cfg.trials < MIN_RISK_TRIALS {
        return Err(CliError::usage(format!("--trials must be at least {MIN_RISK_TRIALS}, got {}", cfg.trials)));
    }
    let estimate = estimate_risk(&cfg).map_err(|e| CliError::runtime(e.to_string()))?;
    let json = serde_json::to_string_pretty(&estimate).expect("estimate serializes");
    let target = args.output.clone().or_else(|| file.and_then(|f| f.output.json));
    match target {
        Some(path) => {
            let path = place(&output_dir(args.output_dir.as_deref()), &path)?;
            fs::write(&path, json + "\n")?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file = experiment::load(&args.config)?;
    let base = experiment::resolve(Some(&file), &args.model.overrides())?;
    let grid = base.expand(&file.grid)?;
    let dir = output_dir(args.output_dir.as_deref());
    let pick = |flag: &Option<PathBuf>, from_file: &Option<PathBuf>, default: &str| {
        place(&dir, flag.as_deref().or(from_file.as_deref()).unwrap_or(Path::new(default)))
    };
    let out = SweepOutput {
        csv: Some(pick(&args.csv, &file.output.csv, "sweep.csv")?),
        jsonl: Some(pick(&args.jsonl, &file.output.jsonl, "sweep.jsonl")?),
        manifest: Some(pick(&args.manifest, &file.output.manifest, "sweep.manifest.json")?),
    };
    eprintln!("sweep: {} configurations -> {}", grid.len(), out.csv.as_ref().unwrap().display());
    let records = sweep(&grid, &out, |rec, total| match (&rec.estimate, &rec.error) {
        (Some(e), _) => eprintln!(
            "[{}/{total}] {} risk = {:.6} (type1 {:.6}, type2 {:.6})",
            rec.index + 1,
            rec.config_hash,
            e.risk,
            e.type1_rate,
            e.type2_rate
        ),
        (None, err) => eprintln!("[{}/{total}] {} error: {}", rec.index + 1, rec.config_hash, err.as_deref().unwrap_or("")),
    })
    .map_err(classify)?;
    eprintln!("sweep: {} computed, {} already complete", records.len(), grid.len() - records.len());
    Ok(())
}

/// Six significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let inputs = BoundInputs {
        n: args.n,
        k: args.k,
        p: args.p,
        q: args.q,
        epsilon: args.epsilon,
        delta: args.delta,
        c_const: args.c_const,
        degree_const: args.degree_const,
        epsilon0: args.eps0,
        log_base: args.log_base.into(),
    };
    let report = query_complexity_bounds(&inputs).map_err(|e| CliError::usage(e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "n = {}, k = {}, p = {}, q = {}, eps = {}, delta = {}, C = {}, degree_const = {}, eps0 = {}, log = {}",
        inputs.n, inputs.k, inputs.p, inputs.q, inputs.epsilon, inputs.delta, inputs.c_const,
        inputs.degree_const, inputs.epsilon0, inputs.log_base
    )?;
    let rows = report.rows();
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    for (label, value) in rows {
        writeln!(out, "{label:<width$}  {:>14}", sig6(value))?;
    }
    Ok(())
}

fn cmd_phase(args: &PhaseArgs) -> Result<(), CliError> {
    let region = classify_phase(PhasePoint { alpha: args.alpha, beta: args.beta })
        .map_err(|e| CliError::usage(e.to_string()))?;
    println!("{region}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Phase(a) => cmd_phase(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
