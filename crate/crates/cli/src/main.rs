//! `halfmoll` — experiment driver for transport equations on the half-space
//! with one-sided boundary mollification.
//!
//! Every subcommand reads an optional TOML configuration, applies
//! command-line overrides, runs one experiment from the core library, and
//! writes deterministic CSV/.dat artifacts plus a JSON manifest into the
//! output directory. Checks are always evaluated and printed; with
//! `--assert` a failed check turns into exit status 1. Configuration
//! problems (bad file, unknown keys, violated parameter constraints) exit
//! with status 2 before any computation starts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod artifacts;
mod config;
mod experiments;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "halfmoll",
    version,
    about = "Numerical experiments for boundary-aware mollification and transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the mollification scale and measure the commutator norm decay
    ConvergeCommutator(RunArgs),
    /// Check the two-sided smoothing (interchange) identity
    Interchange(RunArgs),
    /// Compare mollified boundary/initial traces of a solved field to its data
    TraceCheck(RunArgs),
    /// Solve a transport problem and store the solution with slice norms
    Solve(RunArgs),
    /// Relabel a solution through a C1 function and audit the weak form
    Renormalize(RunArgs),
    /// Two-scale data mollification stability (uniqueness surrogate)
    Uniqueness(RunArgs),
    /// Audit the integrated energy inequality along a solve
    Gronwall(RunArgs),
    /// Measure the boundary defect of symmetric vs one-sided kernels
    MollifierDefect(RunArgs),
    /// Boundary trace residual on a curved (disk/annulus) boundary band
    CurvedTrace(RunArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::ConvergeCommutator(a) => ("converge-commutator", a),
            Command::Interchange(a) => ("interchange", a),
            Command::TraceCheck(a) => ("trace-check", a),
            Command::Solve(a) => ("solve", a),
            Command::Renormalize(a) => ("renormalize", a),
            Command::Uniqueness(a) => ("uniqueness", a),
            Command::Gronwall(a) => ("gronwall", a),
            Command::MollifierDefect(a) => ("mollifier-defect", a),
            Command::CurvedTrace(a) => ("curved-trace", a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Mollification scale; repeat for a sweep, largest first
    #[arg(long = "eta", value_name = "ETA")]
    eta: Vec<f64>,
    /// Override the grid spacing h
    #[arg(long, value_name = "H")]
    grid_h: Option<f64>,
    /// Override the velocity field selector, e.g. "rough_power(0.5)"
    #[arg(long, value_name = "NAME")]
    field: Option<String>,
    /// Exit with status 1 if any experiment check fails
    #[arg(long)]
    assert: bool,
    /// Output directory for artifacts (default "artifacts")
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for the randomized spot checks (default 7)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = configure_threads() {
        eprintln!("config error: {message}");
        return ExitCode::from(2);
    }
    let (name, args) = cli.command.split();
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e:#}");
            ExitCode::from(2)
        }
    }
}

/// Honor `HALFMOLL_THREADS` for the global worker pool. Unset means the
/// library default (one worker per core).
fn configure_threads() -> Result<(), String> {
    match std::env::var("HALFMOLL_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(format!("HALFMOLL_THREADS is not valid unicode: {e}")),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| format!("HALFMOLL_THREADS must be a positive integer, got {raw:?}"))?;
            if n == 0 {
                return Err("HALFMOLL_THREADS must be at least 1".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("cannot configure the thread pool: {e}"))
        }
    }
}

fn run(subcommand: &'static str, args: &RunArgs) -> anyhow::Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.check_experiment_name(subcommand)?;
    cfg.apply_overrides(
        &args.eta,
        args.grid_h,
        args.field.as_deref(),
        args.out.as_deref(),
        args.seed,
    );
    let out_dir = cfg.out_dir();

    let output = experiments::run(subcommand, &cfg, &out_dir)?;

    println!("experiment: {subcommand}");
    println!("artifacts:  {}", output.dir().display());
    for record in &output.artifacts {
        println!("  wrote {} ({})", record.file, record.description);
    }
    for check in &output.assertions {
        let mark = if check.passed { "PASS" } else { "FAIL" };
        println!("[{mark}] {}: {}", check.name, check.detail);
    }
    let ok = output.all_passed();
    if !ok {
        println!(
            "{} of {} checks failed",
            output.assertions.iter().filter(|a| !a.passed).count(),
            output.assertions.len()
        );
    }
    Ok(ok || !args.assert)
}
