use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakgeo_cli::run::{run_solve, run_verify, RunContext};
use weakgeo_cli::threads_from_env;

#[derive(Parser)]
#[command(name = "weakgeo", about = "Weak geodesics on prox-regular sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the discrete energy and write curve, trace and report CSVs.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verify tasks of a config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    Version,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Version => {
            println!("weakgeo {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
        Command::Solve { config, out, seed } => threads_from_env()
            .and_then(|t| RunContext::load(&config, seed, t))
            .and_then(|ctx| run_solve(&ctx, &out)),
        Command::Verify { config, out, seed } => threads_from_env()
            .and_then(|t| RunContext::load(&config, seed, t))
            .and_then(|ctx| run_verify(&ctx, &out)),
    };
    match result {
        Ok(outcome) => {
            eprintln!("{}", outcome.message);
            ExitCode::from(if outcome.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
