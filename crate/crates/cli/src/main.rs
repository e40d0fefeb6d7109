//! `lrrec`: runs the recommender pipeline one stage at a time over an
//! output directory, plus the regression-theory experiments.

mod args;

use std::process::ExitCode;

use clap::Parser;
use lrrec_core::pipeline::{run_pipeline, run_stage, StageReport};
use lrrec_core::Result;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

fn print_report(r: &StageReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string(r).expect("report serializes"));
        return;
    }
    let state = if r.skipped { "up to date" } else { "done" };
    println!("{}: {state} (backend calls {}, cache hits {})", r.stage, r.backend_calls, r.cache_hits);
    for n in &r.notes {
        println!("  {n}");
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    tracing::debug!(out = %cfg.out_dir.display(), "configuration resolved");
    let reports = match cli.command.stage() {
        Some(stage) => vec![run_stage(stage, &cfg, cli.force)?],
        None => match &cli.command {
            Command::ShowConfig => {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            _ => run_pipeline(&cfg, cli.force)?,
        },
    };
    for r in &reports {
        print_report(r, cli.json);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = if cli.verbose { "debug" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("LRREC_LOG").unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
