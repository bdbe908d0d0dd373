use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cocoa_core::harness::{
    build_environment_and_teams, ingest_demonstrations, run_experiment, summarize_dir,
    team_optima, ExperimentConfig, Summary,
};

#[derive(Parser)]
#[command(name = "cocoa", version, about = "Online multi-robot task allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every team, strategy and round of an experiment config.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the configured number of worker threads.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute the summary tables of a finished experiment directory.
    Summarize { log_dir: PathBuf },
    /// Print the optimal total reward of every team in a config.
    Oracle { config: PathBuf },
    /// Check a demonstration file.
    ValidateDemos { file: PathBuf },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))
        .map_err(Failure::Config)
}

fn print_summary(summary: &Summary) {
    println!("{:<8} {:>6} {:>10} {:>12}", "strategy", "runs", "final_bur", "final_cmr");
    for s in &summary.strategies {
        println!(
            "{:<8} {:>6} {:>10.4} {:>12.3}",
            s.strategy.as_str(),
            s.runs,
            s.mean_final_bur_normalized,
            s.mean_final_cmr
        );
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            output,
            workers,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let outcome = run_experiment(&cfg)
                .context("running experiment")
                .map_err(Failure::Runtime)?;
            print_summary(&outcome.summary);
            println!("outputs written to {}", cfg.output_dir.display());
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("run {} failed: {}", f.key.stem(), f.error);
                }
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{} of {} runs failed",
                    outcome.failures.len(),
                    outcome.failures.len() + outcome.runs.len()
                )));
            }
            Ok(())
        }
        Command::Summarize { log_dir } => {
            let summary = summarize_dir(&log_dir)
                .with_context(|| format!("reading runs in {}", log_dir.display()))
                .map_err(Failure::Config)?;
            summary
                .write(&log_dir)
                .context("writing summary")
                .map_err(Failure::Runtime)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Oracle { config } => {
            let cfg = load_config(&config)?;
            let (env, teams) = build_environment_and_teams(&cfg)
                .context("building environment")
                .map_err(Failure::Config)?;
            let contexts = team_optima(&cfg, &env, &teams)
                .context("searching optima")
                .map_err(Failure::Runtime)?;
            println!("{:<6} {:<16} {:>10} {:>6}  assignment", "team", "counts", "optimum", "exact");
            for c in &contexts {
                println!(
                    "{:<6} {:<16} {:>10.6} {:>6}  {}",
                    c.index,
                    format!("{:?}", c.team.counts()),
                    c.optimum.total,
                    c.optimum.exact,
                    serde_json::to_string(&c.optimum.assignment).unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::ValidateDemos { file } => {
            let demos = ingest_demonstrations(&file)
                .with_context(|| format!("validating {}", file.display()))
                .map_err(Failure::Config)?;
            match demos.shape() {
                Some((tasks, traits)) => println!(
                    "{} demonstrations, {tasks} tasks x {traits} traits",
                    demos.len()
                ),
                None => println!("0 demonstrations"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.code();
            let (Failure::Config(e) | Failure::Runtime(e)) = failure;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
