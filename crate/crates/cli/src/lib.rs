//! `swipt`: batch experiments for robust secrecy SWIPT beamforming.
//!
//! Every subcommand writes one CSV and a `manifest.toml` into `--out`;
//! `swipt replay` regenerates the CSV from the manifest alone.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use swipt_core::{MethodTag, ScenarioConfig};
use thiserror::Error;

pub mod grid;
pub mod manifest;
pub mod runner;
pub mod table;

use grid::Vary;
use manifest::Manifest;
use runner::{execute, Experiment, RunSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE_BUDGET: i32 = 3;

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "SWIPT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(swipt_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{failures} solver failures exceed the budget of {allowed}")]
    FailureBudget { failures: usize, allowed: usize },
}

impl From<swipt_core::Error> for CliError {
    fn from(e: swipt_core::Error) -> Self {
        match e {
            swipt_core::Error::Config(m) => CliError::Config(m),
            swipt_core::Error::Parse(m) => CliError::Config(m),
            e => CliError::Core(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::FailureBudget { .. } => EXIT_FAILURE_BUDGET,
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "swipt", version = manifest::VERSION, about = "Robust secrecy SWIPT beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Minimise transmit power on sampled instances.
    SolvePower(Common),
    /// Power minimisation over a parameter grid.
    Sweep(Common),
    /// Fraction of instances on which each method is feasible.
    Feasibility(Common),
    /// Maximise the secrecy rate under the power budget.
    #[command(alias = "srm")]
    SolveSrm {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo trials per design (0 disables).
        #[arg(long, default_value_t = 0)]
        validate: usize,
        /// Bisection bracket width in bits/s/Hz.
        #[arg(long, default_value_t = 1e-3)]
        tol_rate: f64,
    },
    /// Solve, then estimate the true outage probabilities by Monte-Carlo.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = swipt_core::montecarlo::DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Re-run the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: fig2..fig6 or small.
    #[arg(long)]
    preset: Option<String>,
    /// Override a parameter, e.g. `--set eta=-5dB`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(p), _) => ScenarioConfig::from_toml_file(p).map_err(|e| match e {
                swipt_core::Error::Io(io) => CliError::Config(format!("{}: {io}", p.display())),
                e => e.into(),
            })?,
            (None, Some(name)) => ScenarioConfig::preset(name)?,
            (None, None) => ScenarioConfig::default(),
        };
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects NAME=VALUE, got `{s}`")))?;
            let v = swipt_core::scenario::parse_quantity(v)?;
            cfg.set_param(k.trim(), v)?;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Comma-separated methods: bti, sproc, ldi, nonrobust, mrt, robust, all.
    #[arg(long = "methods", visible_alias = "method", default_value = "bti,sproc,ldi")]
    methods: String,
    /// Base seed; defaults to the config's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    /// `name=start:stop:step[unit]`, `name=a,b,c`, or a bare name.
    #[arg(long)]
    vary: Option<String>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Also write per-solve iteration logs under `OUT/logs/`.
    #[arg(long)]
    solver_log: bool,
    /// Exit with status 3 when more solves than this fail.
    #[arg(long)]
    max_failures: Option<usize>,
    /// Worker threads; overrides SWIPT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Solver gap and feasibility tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Common {
    fn spec(&self, experiment: Experiment) -> Result<RunSpec, CliError> {
        let config = self.source.load()?;
        let mut spec = RunSpec::new(experiment, config);
        spec.methods = MethodTag::parse_list(&self.methods)?;
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec.instances = self.instances;
        spec.vary = self.vary.as_deref().map(Vary::parse).transpose()?;
        spec.solver_log = self.solver_log;
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(CliError::Config("--tol must be positive".into()));
            }
            spec.solver.tol_gap = t;
            spec.solver.tol_feas = t;
        }
        Ok(spec)
    }
}

fn thread_pool(flag: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be an integer, got `{v}`")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Executes `spec` and writes the CSV, logs and manifest into `out`.
pub fn run_spec(
    spec: &RunSpec,
    out: &Path,
    threads: Option<usize>,
    max_failures: Option<usize>,
) -> Result<runner::RunOutput, CliError> {
    let pool = thread_pool(threads)?;
    let result = pool.install(|| execute(spec))?;
    std::fs::create_dir_all(out)?;
    let csv = spec.experiment.csv_name();
    result.table.write_csv(&out.join(csv))?;
    let mut outputs = vec![csv.to_string()];
    if !result.logs.is_empty() {
        let dir = out.join("logs");
        std::fs::create_dir_all(&dir)?;
        for (name, t) in &result.logs {
            t.write_csv(&dir.join(name))?;
            outputs.push(format!("logs/{name}"));
        }
    }
    Manifest::new(spec.clone(), outputs).write(out)?;
    if let Some(allowed) = max_failures {
        if result.solver_failures > allowed {
            return Err(CliError::FailureBudget { failures: result.solver_failures, allowed });
        }
    }
    Ok(result)
}

fn report(spec: &RunSpec, out: &Path, r: &runner::RunOutput) {
    println!("{}", r.summary.render());
    println!(
        "wrote {} ({} rows, {} solver failures) and {}",
        out.join(spec.experiment.csv_name()).display(),
        r.table.rows.len(),
        r.solver_failures,
        out.join(manifest::FILE_NAME).display()
    );
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (spec, common) = match cli.cmd {
        Cmd::ShowConfig { source } => {
            print!("{}", source.load()?.to_toml_string());
            return Ok(());
        }
        Cmd::Replay { manifest, out, threads } => {
            let m = Manifest::read(&manifest)?;
            if m.version != manifest::VERSION {
                eprintln!("note: manifest written by {}, replaying with {}", m.version, manifest::VERSION);
            }
            let r = run_spec(&m.run, &out, threads, None)?;
            report(&m.run, &out, &r);
            return Ok(());
        }
        Cmd::SolvePower(c) => (c.spec(Experiment::SolvePower)?, c),
        Cmd::Sweep(c) => (c.spec(Experiment::Sweep)?, c),
        Cmd::Feasibility(c) => (c.spec(Experiment::Feasibility)?, c),
        Cmd::SolveSrm { common, validate, tol_rate } => {
            let mut s = common.spec(Experiment::SolveSrm)?;
            if !(tol_rate > 0.0) {
                return Err(CliError::Config("--tol-rate must be positive".into()));
            }
            s.srm.tol_rate = tol_rate;
            s.trials = validate;
            (s, common)
        }
        Cmd::Validate { common, trials } => {
            let mut s = common.spec(Experiment::Validate)?;
            s.trials = trials;
            (s, common)
        }
    };
    let r = run_spec(&spec, &common.out, common.threads, common.max_failures)?;
    report(&spec, &common.out, &r);
    Ok(())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
