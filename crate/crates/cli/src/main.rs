use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tfm_cli::runner::{library_inventory, run, RunOptions};

#[derive(Parser)]
#[command(
    name = "tfmlab",
    version,
    about = "Transaction-fee-mechanism simulation lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config: execute checkers and estimates, cache by
    /// content hash, and write reports.
    Run {
        config: PathBuf,
        /// Output directory for reports.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's replication count.
        #[arg(long)]
        reps: Option<u64>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (results are identical for any value).
        #[arg(long)]
        jobs: Option<usize>,
        /// Skip the result cache entirely.
        #[arg(long)]
        no_cache: bool,
    },
    /// Print the mechanism / strategy / attack / checker inventory.
    List,
    /// Run a single named checker from a config and print its verdict.
    Verify {
        config: PathBuf,
        #[arg(long)]
        checker: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            reps,
            seed,
            jobs,
            no_cache,
        } => {
            let opts = RunOptions {
                out_dir: out,
                reps_override: reps,
                seed_override: seed,
                jobs,
                no_cache,
                cache_dir: None,
            };
            match run(&config, &opts) {
                Ok(code) => {
                    if code == 1 {
                        eprintln!("golden expectation mismatch (see matrix.txt)");
                    }
                    ExitCode::from(code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::List => {
            print!("{}", library_inventory());
            ExitCode::SUCCESS
        }
        Command::Verify { config, checker } => match tfm_cli::runner::verify(&config, &checker) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
