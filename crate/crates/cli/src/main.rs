use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qspe_learn_cli::{run, validate, Failure, RunArgs};

#[derive(Parser)]
#[command(name = "qspe-learn", version, about = "Parallel in-situ Hamiltonian learning with QSPE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config or replay a manifest.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (default: config `output`, then $QSPE_LEARN_OUTPUT, then ./qspe-out).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            threads,
            output,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot set thread count: {e}");
                    return ExitCode::from(2);
                }
            }
            match run(&RunArgs { config, seed, output }) {
                Ok(a) => {
                    println!("{}", a.report.display());
                    if let Some(t) = &a.table {
                        println!("{}", t.display());
                    }
                    println!("{}", a.manifest.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match validate(&config) {
            Ok(diags) => {
                for d in &diags {
                    println!("{d}");
                }
                if diags.iter().any(|d| d.is_error()) {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(&e),
        },
    }
}

fn fail(e: &Failure) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}
