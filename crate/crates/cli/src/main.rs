use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use branchlab_cli::config::COMMANDS;
use branchlab_cli::{execute, CliError, Config};
use clap::Parser;

/// Monte Carlo experiments on branching random walks and branching
/// interlacements.
#[derive(Parser, Debug)]
#[command(name = "branchlab", version)]
struct Args {
    /// One of: tree-stats, brw-visits, brw-hit, dbrw-hit, dbrw-visits,
    /// intersect, capacity, window, vacant, relation, connect, fit.
    #[arg(value_parser = COMMANDS.map(|c| c.0))]
    command: String,
    /// Experiment configuration (defaults apply to missing keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: `run.threads`, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: `run.out`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &Args) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = args.seed {
        config.experiment.seed = s;
    }
    if args.threads == Some(0) {
        return Err(CliError::Validation("threads: must be positive".into()));
    }
    let threads = args.threads.or(config.run.threads);
    let out = args
        .out
        .clone()
        .or_else(|| config.run.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let start = Instant::now();
    let report = execute(&args.command, &config, threads)?;
    let hash = config.hash();
    for p in report.write(&out, &hash, config.experiment.seed)? {
        println!("{}", p.display());
    }
    eprintln!("{} finished in {:.2?} (config {})", args.command, start.elapsed(), &hash[..12]);
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("branchlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
