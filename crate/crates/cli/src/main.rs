use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reptest::closeness::{rep_closeness_test, ClosenessConfig};
use reptest::independence::{rep_independence_test, IndependenceConfig};
use reptest::sampling::ReplaySource;
use reptest::uniformity::{UniformityConfig, UniformityTester};
use reptest::walks::DistanceMetric;
use reptest::{CountVector, Role, RngStream};
use reptest_cli::config::{ExperimentSpec, InitialSet, MixingSpec, WalkSpec};
use reptest_cli::results::{read_records, write_file, write_result};
use reptest_cli::{check_expectations, run_experiment, Aggregate, CliError, CliResult, Constants, ExperimentConfig, ExperimentResult, SCHEMA_VERSION};
use serde_json::json;

#[derive(Parser)]
#[command(name = "reptest", version, about = "Replicable distribution testers and their experiments")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-shot verdict on sample files.
    Test(TestArgs),
    /// Run a batch experiment from a config file.
    Experiment(RunArgs),
    /// Run a calibration config and write the constants file.
    Calibrate(RunArgs),
    /// Exact mixing curves of a truncated walk.
    Mixing(MixingArgs),
    /// Recompute aggregates from a per-trial CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Constants file overriding the tester constants in the config.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Exit with code 3 if the config's `expect` bounds fail.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Uniformity,
    Closeness,
    Independence,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Samples of `p` (pairs for independence).
    #[arg(long)]
    samples: PathBuf,
    /// Samples of `q` (closeness only).
    #[arg(long)]
    samples_q: Option<PathBuf>,
    /// Tester config JSON; otherwise built from the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Seed of the tester's internal randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    L1,
    Tv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Initials {
    Poisson,
    PointMasses,
    All,
}

#[derive(Args)]
struct MixingArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    xi: f64,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, num_args = 1.., default_values_t = [0.1, 0.01, 0.001, 0.0001])]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "l1")]
    metric: Metric,
    #[arg(long, value_enum, default_value = "all")]
    initials: Initials,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-trial records CSV written by `experiment`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Test(a) => test(a),
        Command::Experiment(a) => experiment(a, false),
        Command::Calibrate(a) => experiment(a, true),
        Command::Mixing(a) => mixing(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(|e| CliError::io("stdout", e))
}

fn finish(result: &ExperimentResult, out: Option<&Path>, started: Instant) -> CliResult<()> {
    let secs = started.elapsed().as_secs_f64();
    match out {
        Some(path) => {
            let sidecar = write_result(result, path, secs)?;
            eprintln!("wrote {} and {}", path.display(), sidecar.display());
            Ok(())
        }
        None => {
            let mut v = serde_json::to_value(result)?;
            v["wall_clock_secs"] = json!(secs);
            print_json(&v)
        }
    }
}

fn experiment(a: RunArgs, calibrate: bool) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(path) = &a.constants {
        cfg.apply_constants(&Constants::load(path)?);
    }
    if calibrate && !matches!(cfg.experiment, ExperimentSpec::Calibration(_)) {
        return Err(CliError::Validation("calibrate needs a config of kind `calibration`".into()));
    }
    if a.check && cfg.expect.is_none() {
        return Err(CliError::Validation("--check needs an `expect` block in the config".into()));
    }
    let result = run_experiment(&cfg)?;
    let out = a.out.or_else(|| cfg.output.clone());
    if calibrate {
        // The constants file is the main output; the grid table sits beside it.
        let constants = &result.details["constants"];
        match &out {
            Some(path) => {
                write_file(path, &serde_json::to_string_pretty(constants)?)?;
                let grid = path.with_extension("grid.csv");
                write_result(&result, &grid, started.elapsed().as_secs_f64())?;
                eprintln!("wrote {} and {}", path.display(), grid.display());
            }
            None => print_json(constants)?,
        }
    } else {
        finish(&result, out.as_deref(), started)?;
    }
    if a.check {
        let failures = check_expectations(cfg.expect.as_ref().expect("checked above"), &result.aggregate);
        if !failures.is_empty() {
            return Err(CliError::CheckFailed(failures.join("; ")));
        }
        eprintln!("check passed");
    }
    Ok(())
}

fn need<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Validation(format!("missing --{flag} (or pass --config)")))
}

fn load_config<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn test(a: TestArgs) -> CliResult<()> {
    let constants = a.constants.as_deref().map(Constants::load).transpose()?.unwrap_or_default();
    let internal = RngStream::new(a.seed).derive(Role::Internal);
    let samples_stream = RngStream::new(a.seed).derive(Role::Sample1);
    match a.family {
        Family::Uniformity => {
            let mut cfg: UniformityConfig = match &a.config {
                Some(p) => load_config(p)?,
                None => UniformityConfig::new(need(a.n, "n")?, need(a.epsilon, "epsilon")?, need(a.rho, "rho")?)?,
            };
            if let Some(k) = constants.uniformity {
                cfg.c1_u = k.c1_u;
                cfg.c2_u = k.c2_u;
            }
            let samples = reptest_cli::samples::read_1d(&a.samples)?;
            // A fixed-size sample: statistic and thresholds use its actual size.
            let cfg = cfg.with_override(Some(samples.len() as u64))?;
            let counts = CountVector::from_samples(cfg.n, &samples)?;
            let out = UniformityTester(cfg).evaluate(&counts, &internal)?;
            print_json(&json!({"family": "uniformity", "samples": samples.len(), "outcome": out}))
        }
        Family::Closeness => {
            let mut cfg: ClosenessConfig = match &a.config {
                Some(p) => load_config(p)?,
                None => ClosenessConfig::new(need(a.n, "n")?, need(a.epsilon, "epsilon")?, need(a.rho, "rho")?)?,
            };
            if let Some(k) = constants.closeness {
                cfg = cfg.with_constants(k.c1, k.c2)?;
            }
            let q_path = a
                .samples_q
                .as_deref()
                .ok_or_else(|| CliError::Validation("closeness needs --samples-q".into()))?;
            let p = ReplaySource::new(cfg.n, reptest_cli::samples::read_1d(&a.samples)?)?;
            let q = ReplaySource::new(cfg.n, reptest_cli::samples::read_1d(q_path)?)?;
            let out = rep_closeness_test(&p, &q, &cfg, &internal, &samples_stream)?;
            print_json(&json!({"family": "closeness", "consumed": [p.consumed(), q.consumed()], "outcome": out}))
        }
        Family::Independence => {
            let mut cfg: IndependenceConfig = match &a.config {
                Some(p) => load_config(p)?,
                None => IndependenceConfig::new(need(a.rows, "rows")?, need(a.cols, "cols")?, need(a.epsilon, "epsilon")?, need(a.rho, "rho")?)?,
            };
            if let Some(k) = constants.independence {
                cfg.c_n = k.c_n;
                cfg.c_i1 = k.c_i1;
                cfg.c_i2 = k.c_i2;
            }
            cfg.validate()?;
            let p = ReplaySource::new_pairs(cfg.n1, cfg.n2, reptest_cli::samples::read_2d(&a.samples)?)?;
            let out = rep_independence_test(&p, &cfg, &internal, &samples_stream)?;
            print_json(&json!({"family": "independence", "consumed": p.consumed(), "outcome": out}))
        }
    }
}

fn mixing(a: MixingArgs) -> CliResult<()> {
    let started = Instant::now();
    let spec = MixingSpec {
        walk: WalkSpec::Coordinate {
            m: a.m,
            n: a.n,
            xi: a.xi,
            truncation: a.truncation,
        },
        deltas: a.delta,
        horizon: a.horizon,
        metric: match a.metric {
            Metric::L1 => DistanceMetric::L1,
            Metric::Tv => DistanceMetric::Tv,
        },
        initials: match a.initials {
            Initials::Poisson => InitialSet::Poisson,
            Initials::PointMasses => InitialSet::PointMasses,
            Initials::All => InitialSet::All,
        },
    };
    let cfg = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        trials: 1,
        output: None,
        experiment: ExperimentSpec::Mixing(spec),
        expect: None,
    };
    let result = run_experiment(&cfg)?;
    match &a.out {
        Some(_) => finish(&result, a.out.as_deref(), started),
        None => print_json(&result.details),
    }
}

fn report(a: ReportArgs) -> CliResult<()> {
    let records = read_records(&a.input)?;
    let agg = Aggregate::from_records(&records);
    match &a.out {
        Some(path) => write_file(path, &serde_json::to_string_pretty(&agg)?),
        None => print_json(&agg),
    }
}
