use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ganlab_cli::acceptance::run_suite;
use ganlab_cli::registry;
use ganlab_cli::{run, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ganlab", version, about = "Toy adversarial-training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this seed only.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered experiments.
    List,
    /// Print an experiment's default config.
    Defaults { experiment: String },
    /// Run the full acceptance suite.
    Check {
        #[arg(long, default_value = "ganlab-check")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let manifest = run(&cfg)?;
            for c in &manifest.checks {
                println!("{}", c.line());
            }
            println!(
                "{}: {} artifacts in {} ({:.1} s)",
                manifest.experiment,
                manifest.artifacts.len(),
                manifest.config.out_dir.display(),
                manifest.elapsed_seconds
            );
            Ok(manifest.passed())
        }
        Command::List => {
            print!("{}", registry::table());
            Ok(true)
        }
        Command::Defaults { experiment } => {
            let exp = registry::find(&experiment)?;
            print!("{}", (exp.defaults)().to_json());
            Ok(true)
        }
        Command::Check { out } => {
            let criteria = run_suite(&out, |c| println!("{}", c.line()))?;
            let passed = criteria.iter().filter(|c| c.pass()).count();
            println!("{passed} of {} criteria pass", criteria.len());
            Ok(passed == criteria.len())
        }
    }
}

