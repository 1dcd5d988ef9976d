use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use skinlab::experiment::{self, ExperimentReport};
use skinlab::io::RunConfig;
use skinlab::Error;

#[derive(Parser)]
#[command(name = "skinlab", version, about = "Skinning measures and horosphere-type equidistribution on hyperbolic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV/JSON artifacts; defaults to the config's `output`.
    #[arg(long, global = true, env = "SKINLAB_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Enumerate the orbit of the basepoint and export it.
    Orbit,
    /// Estimate the critical exponent and check its stability.
    Delta,
    /// Approximate the Patterson density and check equivariance.
    Patterson,
    /// Build the skinning measure and check its scaling laws.
    Skinning,
    /// Push the skinning measure along the flow and track its discrepancy.
    Equidistribute,
    /// Fit the decay of skinning mass into a cusp.
    CuspDecay,
    /// Decide finiteness of the skinning measure from critical exponents.
    Finiteness,
    /// Compare box masses of the Bowen–Margulis measure with skinning masses.
    Disintegration,
    /// Check the integral identity against a product test function.
    PhiIntegral,
    /// Run the built-in identity checks; needs no config.
    Selftest,
}

fn load(path: Option<&Path>) -> Result<RunConfig, Error> {
    let path = path.ok_or_else(|| Error::config("--config", "missing; pass --config PATH"))?;
    RunConfig::load(path)
}

fn run(cli: &Cli) -> Result<ExperimentReport, Error> {
    if let Command::Selftest = cli.command {
        return experiment::selftest(cli.out.as_deref());
    }
    let cfg = load(cli.config.as_deref())?;
    let out = cli.out.clone().or_else(|| cfg.output.clone());
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let out = out.as_deref();
    match cli.command {
        Command::Orbit => experiment::run_orbit(&cfg, out),
        Command::Delta => experiment::run_delta(&cfg, out),
        Command::Patterson => experiment::run_patterson(&cfg, out),
        Command::Skinning => experiment::run_skinning(&cfg, out),
        Command::Equidistribute => experiment::run_equidistribution(&cfg, out),
        Command::CuspDecay => experiment::run_cusp_decay(&cfg, out),
        Command::Finiteness => experiment::check_finiteness_criterion(&cfg, out),
        Command::Disintegration => experiment::run_disintegration_check(&cfg, out),
        Command::PhiIntegral => experiment::run_phi_integral(&cfg, out),
        Command::Selftest => unreachable!(),
    }
}

/// Bad input is a usage error; everything else means the run could not
/// establish the claim.
fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Group(_) | Error::InvalidPoint(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("setting up the thread pool")
        {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(report) => {
            println!("{}", report.summary_line());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage_error(&e) { 1 } else { 2 })
        }
    }
}
