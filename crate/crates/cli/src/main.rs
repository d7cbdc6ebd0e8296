use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use holder_hj_cli::config::ExperimentConfig;
use holder_hj_cli::summary::emit_report;

#[derive(Parser)]
#[command(name = "holder-hj", version, about = "Numerical checks of Hölder estimates for Hamilton-Jacobi equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render report.txt from an existing summary.csv.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HOLDER_HJ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("HOLDER_HJ_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            match holder_hj_cli::run(&cfg) {
                Ok(outcome) => {
                    let failed: Vec<&str> = outcome.rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
                    println!(
                        "{}: {} checks, {} failed, artifacts in {}",
                        cfg.experiment.name(),
                        outcome.rows.len(),
                        failed.len(),
                        outcome.dir.display()
                    );
                    if failed.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("failed: {}", failed.join(", "));
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Report { dir } => match emit_report(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
