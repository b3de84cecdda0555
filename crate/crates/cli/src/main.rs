//! Two-stage multi-vector retrieval from the command line: build an IVFPQ
//! index, search it with exact MaxSim re-ranking, and evaluate the output
//! against TREC-format judgments.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error. Diagnostics go to
//! stderr; data goes only to stdout and the declared output paths. The
//! worker pool size comes from `MAXSIM_THREADS` (default: all cores) and
//! never changes any output byte.

use clap::{Parser, Subcommand};

mod commands;
mod parse;

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "maxsim",
    version,
    about = "Two-stage multi-vector retrieval engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an IVFPQ index over a corpus
    Build(commands::BuildArgs),
    /// Two-stage search: ANN candidates, then exact MaxSim re-ranking
    Search(commands::SearchArgs),
    /// Emit the approximate first-stage ranking without re-ranking
    FirstStage(commands::FirstStageArgs),
    /// Score a run file against qrels
    Evaluate(commands::EvaluateArgs),
    /// Run the pipeline over a grid of cut depths and emit a CSV
    Sweep(commands::SweepArgs),
    /// Export per-document rank pairs and Spearman correlation of two runs
    Correlate(commands::CorrelateArgs),
    /// Generate a clustered synthetic workload
    Synth(commands::SynthArgs),
}

fn configure_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MAXSIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| CliError::Usage(format!("MAXSIM_THREADS='{raw}' is not an integer")))?;
    if threads == 0 {
        return Err(CliError::Usage("MAXSIM_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    configure_pool()?;
    match &cli.command {
        Command::Build(args) => commands::run_build(args),
        Command::Search(args) => commands::run_search(args),
        Command::FirstStage(args) => commands::run_firststage(args),
        Command::Evaluate(args) => commands::run_evaluate(args),
        Command::Sweep(args) => commands::run_sweep(args),
        Command::Correlate(args) => commands::run_correlate(args),
        Command::Synth(args) => commands::run_synth(args),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}
