//! `tcs`: Monte Carlo sweeps, threshold estimates and self-checks for the
//! cluster-state bond-loss simulator.

mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tcs_core::decoder::Backend;
use tcs_core::experiment::{
    estimate_threshold_with, fit_threshold_curve, percolation_limit_analytic, run_batch, BatchError, PointEstimate,
    SweepSpec, ThresholdEstimate, ThresholdOptions, TrialMode,
};
use tcs_core::oracle::{verify_matching, verify_small_lattice, CheckReport, OracleConfig, WeightFault};
use tcs_core::Scheme;

use config::Config;
use output::{fmt6, write_points, write_thresholds, Format};

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "TCS_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "tcs", version, about = "Topological cluster state simulations with heralded bond failures")]
struct Cli {
    /// `key = value` file with defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log one line per finished grid point to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Trials per grid point [default: 10000].
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core [default: $TCS_WORKERS or 0].
    #[arg(long)]
    workers: Option<usize>,
    /// Output file [default: stdout].
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// [default: csv]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Matching implementation [default: auto].
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Stop after this many seconds and write the points finished so far.
    #[arg(long, value_name = "SECONDS")]
    time_budget: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Dense,
    Sparse,
    Auto,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Sparse => Backend::Sparse,
            BackendArg::Auto => Backend::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Matching,
    SmallLattice,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Logical failure rates over a grid of distances and error rates.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Code distances, comma separated.
        #[arg(long, value_delimiter = ',')]
        distance: Vec<usize>,
        /// Bond failure probabilities, comma separated [default: 0].
        #[arg(long, value_delimiter = ',')]
        p_bond: Vec<f64>,
        /// Measurement error probabilities, comma separated.
        #[arg(long, value_delimiter = ',')]
        p_comp: Vec<f64>,
        /// Only sample damage; a trial fails iff it percolates.
        #[arg(long)]
        percolation_only: bool,
    },
    /// Threshold per bond failure rate from curve crossings.
    Threshold {
        #[command(flatten)]
        run: RunArgs,
        /// At least three code distances [default: 5,7,9].
        #[arg(long, value_delimiter = ',')]
        distances: Vec<usize>,
        /// Bond failure probabilities, comma separated [default: 0].
        #[arg(long, value_delimiter = ',')]
        p_bond: Vec<f64>,
        /// `LOW:HIGH:COUNT`, evenly spaced and inclusive, COUNT >= 4.
        #[arg(long, value_name = "LOW:HIGH:COUNT")]
        p_comp_range: Option<String>,
        /// Bootstrap resamples for the threshold interval [default: 1000].
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Also write the underlying point estimates here, as CSV.
        #[arg(long)]
        points_output: Option<PathBuf>,
    },
    /// Closed-form bond failure rate at which percolation sets in.
    Analytic {
        #[arg(long)]
        scheme: Scheme,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Cross-checks against brute-force references.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Random matching instances.
        #[arg(long, default_value_t = 500)]
        instances: usize,
        /// Monte Carlo trials per small-lattice point.
        #[arg(long, default_value_t = 200_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scales boundary weights seen by the matcher; the matching suite must then fail.
        #[arg(long, hide = true, value_name = "SCALE")]
        inject_fault: Option<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_failure(e: io::Error) -> CliError {
    CliError::Failure(e.to_string())
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| usage(format!("`{key}` value `{}`: {e}", s.trim()))))
        .collect()
}

/// Flag value, else config value, else `None`.
fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key).map_err(usage),
    }
}

fn pick_list<T: FromStr>(flag: Vec<T>, cfg: &Config, key: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if !flag.is_empty() {
        return Ok(flag);
    }
    cfg.raw(key).map_or(Ok(Vec::new()), |raw| parse_list(key, raw))
}

/// `LOW:HIGH:COUNT` as evenly spaced values, endpoints included.
fn parse_range(raw: &str) -> CliResult<Vec<f64>> {
    let bad = || usage(format!("malformed p-comp range `{raw}`: expected LOW:HIGH:COUNT with LOW < HIGH and COUNT >= 4"));
    let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo < hi) || n < 4 {
        return Err(bad());
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

struct Common {
    scheme: Scheme,
    trials: u64,
    seed: u64,
    workers: usize,
    format: Format,
    backend: Backend,
    time_budget: Option<Duration>,
    output: Option<PathBuf>,
}

fn resolve_common(run: RunArgs, cfg: &Config) -> CliResult<Common> {
    let scheme = pick(run.scheme, cfg, "scheme")?.ok_or_else(|| usage("missing --scheme"))?;
    let workers = match pick(run.workers, cfg, "workers")? {
        Some(w) => w,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|e| usage(format!("{WORKERS_ENV}={v}: {e}")))?,
            Err(_) => 0,
        },
    };
    let format = match run.format {
        Some(f) => f,
        None => match cfg.raw("format") {
            Some(raw) => Format::from_str(raw, true).map_err(|e| usage(format!("config key `format`: {e}")))?,
            None => Format::Csv,
        },
    };
    let backend = match run.backend {
        Some(b) => b.into(),
        None => match cfg.raw("backend") {
            Some(raw) => BackendArg::from_str(raw, true).map_err(|e| usage(format!("config key `backend`: {e}")))?.into(),
            None => Backend::Auto,
        },
    };
    let time_budget = match pick(run.time_budget, cfg, "time-budget")? {
        Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(usage(format!("time budget must be positive, got {s}"))),
        None => None,
    };
    Ok(Common {
        scheme,
        trials: pick(run.trials, cfg, "trials")?.unwrap_or(10_000),
        seed: pick(run.seed, cfg, "seed")?.unwrap_or(0),
        workers,
        format,
        backend,
        time_budget,
        output: run.output,
    })
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn log_points(points: &[PointEstimate]) {
    for p in points {
        eprintln!(
            "{} d={} p_bond={} p_comp={}: {}/{} failed, rate {}",
            p.scheme,
            p.d,
            fmt6(p.p_bond),
            fmt6(p.p_comp),
            p.failures,
            p.trials,
            fmt6(p.rate)
        );
    }
}

/// Runs the batch; partial results come back alongside the reason they are partial.
fn execute(spec: &SweepSpec) -> CliResult<(Vec<PointEstimate>, Option<String>)> {
    match run_batch(spec) {
        Ok(points) => Ok((points, None)),
        Err(BatchError::Invalid(e)) => Err(usage(e.to_string())),
        Err(e @ BatchError::Partial { .. }) => {
            let msg = e.to_string();
            let BatchError::Partial { points, .. } = e else { unreachable!() };
            Ok((points, Some(msg)))
        }
    }
}

fn sweep(common: &Common, distances: Vec<usize>, p_bonds: Vec<f64>, p_comps: Vec<f64>) -> SweepSpec {
    let mut spec = SweepSpec::new(common.scheme, distances, p_bonds, p_comps, common.trials, common.seed);
    spec.workers = common.workers;
    spec.backend = common.backend;
    spec.time_budget = common.time_budget;
    spec
}

fn cmd_simulate(
    run: RunArgs,
    distance: Vec<usize>,
    p_bond: Vec<f64>,
    p_comp: Vec<f64>,
    percolation_only: bool,
    cfg: &Config,
    verbose: bool,
) -> CliResult {
    let common = resolve_common(run, cfg)?;
    let distances = pick_list(distance, cfg, "distance")?;
    if distances.is_empty() {
        return Err(usage("missing --distance"));
    }
    let mut p_bonds = pick_list(p_bond, cfg, "p-bond")?;
    if p_bonds.is_empty() {
        p_bonds.push(0.0);
    }
    let p_comps = pick_list(p_comp, cfg, "p-comp")?;
    if p_comps.is_empty() {
        return Err(usage("missing --p-comp"));
    }
    let mut spec = sweep(&common, distances, p_bonds, p_comps);
    if percolation_only {
        spec.mode = TrialMode::PercolationOnly;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mut out = open_output(&common.output)?;
    let (points, partial) = execute(&spec)?;
    if verbose {
        log_points(&points);
    }
    write_points(&mut out, &points, common.format).and_then(|_| out.flush()).map_err(io_failure)?;
    partial.map_or(Ok(()), |msg| Err(CliError::Failure(msg)))
}

#[allow(clippy::too_many_arguments)]
fn cmd_threshold(
    run: RunArgs,
    distances: Vec<usize>,
    p_bond: Vec<f64>,
    p_comp_range: Option<String>,
    bootstrap: Option<usize>,
    points_output: Option<PathBuf>,
    cfg: &Config,
    verbose: bool,
) -> CliResult {
    let common = resolve_common(run, cfg)?;
    let mut distances = pick_list(distances, cfg, "distances")?;
    if distances.is_empty() {
        distances = vec![5, 7, 9];
    }
    let mut unique = distances.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < 3 {
        return Err(usage("threshold estimation needs at least three distinct distances"));
    }
    let mut p_bonds = pick_list(p_bond, cfg, "p-bond")?;
    if p_bonds.is_empty() {
        p_bonds.push(0.0);
    }
    let range = pick(p_comp_range, cfg, "p-comp-range")?.ok_or_else(|| usage("missing --p-comp-range"))?;
    let p_comps = parse_range(&range)?;
    let bootstrap = pick(bootstrap, cfg, "bootstrap")?.unwrap_or(1000);
    let spec = sweep(&common, distances, p_bonds.clone(), p_comps);
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mut out = open_output(&common.output)?;
    let mut points_out = points_output.as_ref().map(|_| open_output(&points_output)).transpose()?;

    let (points, partial) = execute(&spec)?;
    if verbose {
        log_points(&points);
    }
    if let Some(w) = points_out.as_mut() {
        write_points(w, &points, Format::Csv).and_then(|_| w.flush()).map_err(io_failure)?;
    }
    if let Some(msg) = partial {
        return Err(CliError::Failure(msg));
    }
    let mut records: Vec<ThresholdEstimate> = Vec::new();
    for &pb in &p_bonds {
        let subset: Vec<PointEstimate> = points.iter().filter(|p| p.p_bond == pb).cloned().collect();
        let opts = ThresholdOptions { bootstrap, seed: common.seed };
        records.push(estimate_threshold_with(&subset, opts).map_err(|e| CliError::Failure(e.to_string()))?);
    }
    write_thresholds(&mut out, &records, common.format).and_then(|_| out.flush()).map_err(io_failure)?;

    let found: Vec<(f64, f64)> = records.iter().filter_map(|r| r.p_th.map(|t| (r.p_bond, t))).collect();
    if found.len() >= 4 {
        if let Ok(fit) = fit_threshold_curve(&found) {
            let [a, b, c] = fit.coefficients;
            eprintln!("p_th fit: {} + {} p_bond + {} p_bond^2", fmt6(a), fmt6(b), fmt6(c));
        }
    }
    Ok(())
}

fn cmd_analytic(scheme: Scheme, format: Format) -> CliResult {
    let p: f64 = percolation_limit_analytic(scheme);
    let mut out = io::stdout().lock();
    let res = match format {
        Format::Csv => writeln!(out, "scheme,p_bond_limit\n{},{}", scheme, fmt6(p)),
        Format::Json => writeln!(out, "{{\"scheme\": \"{}\", \"p_bond_limit\": {}}}", scheme, fmt6(p)),
    };
    res.map_err(io_failure)
}

fn cmd_verify(suite: Suite, instances: usize, trials: u64, seed: u64, inject_fault: Option<f64>) -> CliResult {
    if trials == 0 || instances == 0 {
        return Err(usage("--instances and --trials must be positive"));
    }
    let config = OracleConfig::default();
    let mut reports: Vec<CheckReport> = Vec::new();
    if matches!(suite, Suite::Matching | Suite::All) {
        let fault = inject_fault.map(|scale| WeightFault { scale });
        reports.push(verify_matching(instances, seed, fault, &config));
    }
    if matches!(suite, Suite::SmallLattice | Suite::All) {
        reports.extend(verify_small_lattice(&[0.02, 0.05, 0.10], trials, seed, 4.0, &config).map_err(|e| CliError::Failure(e.to_string()))?);
    }
    let mut out = io::stdout().lock();
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:width$}  result  detail", "check").map_err(io_failure)?;
    for r in &reports {
        writeln!(out, "{:width$}  {:6}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail).map_err(io_failure)?;
        if !r.failing_seeds.is_empty() {
            let seeds: Vec<String> = r.failing_seeds.iter().map(u64::to_string).collect();
            writeln!(out, "{:width$}          failing seeds: {}", "", seeds.join(" ")).map_err(io_failure)?;
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failure(format!("{failed} of {} checks failed", reports.len())))
    }
}

fn run(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(usage)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Simulate { run, distance, p_bond, p_comp, percolation_only } => {
            cmd_simulate(run, distance, p_bond, p_comp, percolation_only, &cfg, cli.verbose)
        }
        Command::Threshold { run, distances, p_bond, p_comp_range, bootstrap, points_output } => {
            cmd_threshold(run, distances, p_bond, p_comp_range, bootstrap, points_output, &cfg, cli.verbose)
        }
        Command::Analytic { scheme, format } => cmd_analytic(scheme, format),
        Command::Verify { suite, instances, trials, seed, inject_fault } => cmd_verify(suite, instances, trials, seed, inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
