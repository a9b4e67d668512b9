//! `psapprox`: batch driver for exterior-diffusion and point-source experiments.
//!
//! Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 bound-check failure.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use manifest::Run;

#[derive(Debug, Parser)]
#[command(name = "psapprox", version, about = "Exterior diffusion versus point-source model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML); the reference circle experiment when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replaces the seed of the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces one tolerance, e.g. `slack=0.1`.
    #[arg(long = "tol-override", global = true, value_name = "KEY=VAL", value_parser = parse_override)]
    tol_override: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel property checks.
    GreenCheck,
    /// Full and point-model trajectories.
    Simulate,
    /// Solve, then report c*, error norms, energy terms and margins.
    Compare,
    /// Margin report, reusing a verified cached trajectory.
    Bounds,
    /// Source and initial-mass matching.
    Optimize,
    /// Acceptance suite.
    Reproduce {
        /// Criteria to run; all when empty.
        ids: Vec<u8>,
    },
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VAL, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("value of `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    for (k, v) in &cli.tol_override {
        cfg.tolerances.set(k, *v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let name = match &cli.command {
        Command::GreenCheck => "green-check",
        Command::Simulate => "simulate",
        Command::Compare => "compare",
        Command::Bounds => "bounds",
        Command::Optimize => "optimize",
        Command::Reproduce { .. } => "reproduce",
    };
    let mut run = Run::new(&cli.out, name);
    match &cli.command {
        Command::GreenCheck => {
            for c in commands::green_check(&mut run) {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.title, c.detail);
            }
        }
        Command::Reproduce { ids } => {
            for c in commands::reproduce(ids, &mut run)? {
                println!("{}", c.line());
            }
        }
        cmd => {
            let cfg = load(cli)?;
            run.config_hash = Some(cfg.hash());
            match cmd {
                Command::Simulate => commands::simulate(&cfg, &mut run)?,
                Command::Compare => {
                    commands::compare(&cfg, &mut run)?;
                }
                Command::Bounds => {
                    commands::bounds(&cfg, &mut run)?;
                }
                Command::Optimize => {
                    let t = commands::optimize_cmd(&cfg, &mut run)?;
                    println!(
                        "best objective {:.6e} (baseline {:.6e}, reduction {:.4}) after {} evaluations",
                        t.best_objective,
                        t.baseline_objective,
                        t.reduction(),
                        t.iterates.len()
                    );
                }
                _ => unreachable!(),
            }
        }
    }
    let manifest = run.finish()?;
    for c in &manifest.checks {
        if !matches!(cli.command, Command::GreenCheck | Command::Reproduce { .. }) {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if let Some(src) = &manifest.trajectory_source {
        println!("trajectory: {src}");
    }
    println!("{} files written to {}", manifest.files.len(), cli.out.display());
    Ok(manifest.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
