//! `entlab` command-line driver.
//!
//! Every subcommand writes `<sub>.json` (deterministic for a fixed config
//! and seed), `<sub>.meta.json` (timing, threads) and CSV side tables into
//! the output directory. Exit status: 0 clean, 1 hard bound violation,
//! 2 usage or numerical error.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod report;

use report::{Ctx, Meta, Outcome};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lab(#[from] entlab::LabError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Comma-separated list flag. Parsed as one value so a later flag replaces
/// an earlier one instead of appending to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<T>()
                    .map_err(|e| format!("`{}`: {e}", x.trim()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "entlab",
    version,
    about = "Entanglement-rate and area-law experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for reports and tables.
    #[arg(
        long,
        global = true,
        env = "ENTLAB_OUT_DIR",
        default_value = "entlab-out"
    )]
    pub out_dir: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true, env = "ENTLAB_THREADS")]
    pub threads: Option<usize>,
    /// Flat `key = value` file with defaults for this run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Commutator trace-norm ratio scan over sampled dominated pairs.
    SimScan(commands::sim::ScanArgs),
    /// Audit of the partition decomposition behind the commutator bound.
    SimDecompose(commands::sim::DecomposeArgs),
    /// Maximize the entangling rate over states.
    SieMax(commands::rates::SieArgs),
    /// Analytic rates against finite differences, sandwiches and swap gates.
    RatesCheck(commands::rates::CheckArgs),
    /// Exact commutator norms against the Lieb-Robinson bound.
    LrCheck(commands::dynamics::LrArgs),
    /// Distances, boundary, area and boundary profile of a region.
    LatticeInfo(commands::lattice::InfoArgs),
    /// Build the quasi-adiabatic filter function.
    FilterBuild(commands::qac::FilterArgs),
    /// Transport a ground state along a gapped path.
    QaPath(commands::qac::PathArgs),
    /// Decay of the truncated quasi-adiabatic generators.
    QaTruncate(commands::qac::TruncateArgs),
    /// Jordan-Wigner mapping checks.
    JwCheck(commands::lattice::JwArgs),
    /// Export the low-lying spectrum of a preset model.
    Spectrum(commands::lattice::SpectrumArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimScan(_) => "sim-scan",
            Command::SimDecompose(_) => "sim-decompose",
            Command::SieMax(_) => "sie-max",
            Command::RatesCheck(_) => "rates-check",
            Command::LrCheck(_) => "lr-check",
            Command::LatticeInfo(_) => "lattice-info",
            Command::FilterBuild(_) => "filter-build",
            Command::QaPath(_) => "qa-path",
            Command::QaTruncate(_) => "qa-truncate",
            Command::JwCheck(_) => "jw-check",
            Command::Spectrum(_) => "spectrum",
        }
    }

    fn config(&self) -> Result<serde_json::Value, CliError> {
        Ok(match self {
            Command::SimScan(a) => serde_json::to_value(a)?,
            Command::SimDecompose(a) => serde_json::to_value(a)?,
            Command::SieMax(a) => serde_json::to_value(a)?,
            Command::RatesCheck(a) => serde_json::to_value(a)?,
            Command::LrCheck(a) => serde_json::to_value(a)?,
            Command::LatticeInfo(a) => serde_json::to_value(a)?,
            Command::FilterBuild(a) => serde_json::to_value(a)?,
            Command::QaPath(a) => serde_json::to_value(a)?,
            Command::QaTruncate(a) => serde_json::to_value(a)?,
            Command::JwCheck(a) => serde_json::to_value(a)?,
            Command::Spectrum(a) => serde_json::to_value(a)?,
        })
    }

    fn dispatch(&self, ctx: &mut Ctx) -> Result<Outcome, CliError> {
        match self {
            Command::SimScan(a) => commands::sim::scan(a, ctx),
            Command::SimDecompose(a) => commands::sim::decompose(a, ctx),
            Command::SieMax(a) => commands::rates::sie_max(a, ctx),
            Command::RatesCheck(a) => commands::rates::check(a, ctx),
            Command::LrCheck(a) => commands::dynamics::lr(a, ctx),
            Command::LatticeInfo(a) => commands::lattice::info(a, ctx),
            Command::FilterBuild(a) => commands::qac::filter(a, ctx),
            Command::QaPath(a) => commands::qac::path(a, ctx),
            Command::QaTruncate(a) => commands::qac::truncate(a, ctx),
            Command::JwCheck(a) => commands::lattice::jw(a, ctx),
            Command::Spectrum(a) => commands::lattice::spectrum(a, ctx),
        }
    }
}

/// The clap command with config-friendly settings on every subcommand.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let cmd = command();
    let args = match config::expand_args(args, &cmd) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let argv: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_CLEAN
            };
        }
    };
    match execute(&cli, argv) {
        Ok(clean) => {
            if clean {
                EXIT_CLEAN
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, argv: Vec<String>) -> Result<bool, CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second build in the same process (tests) keeps the first pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::debug!("thread pool already set: {e}");
        }
    }
    let name = cli.command.name();
    let out_dir = &cli.global.out_dir;
    let mut ctx = Ctx::new(name, cli.global.seed, out_dir)?;
    let start = Instant::now();
    let outcome = cli.command.dispatch(&mut ctx)?;
    let report = report::assemble(&ctx, cli.command.config()?, outcome);
    let meta = Meta::now(name, start.elapsed(), out_dir, argv);
    std::fs::write(
        out_dir.join(format!("{name}.json")),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(
        out_dir.join(format!("{name}.meta.json")),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;

    for v in &report.violations {
        eprintln!(
            "violation: {} = {:.6e} (bound {:.6e})",
            v.name, v.value, v.bound
        );
    }
    for f in &report.soft_flags {
        eprintln!("flag: {} = {:.6e} (bound {:.6e})", f.name, f.value, f.bound);
    }
    println!(
        "{name}: {} ({} checks, {} violations) -> {}",
        report.status,
        report.checks.len(),
        report.violations.len(),
        out_dir.join(format!("{name}.json")).display()
    );
    Ok(report.clean())
}
