use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bayesgi::cli::{parse_scenario, run, RunError};

#[derive(Parser)]
#[command(name = "bayesgi", version, about = "Solve and simulate Bayesian Gaussian interference games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed; overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let Cli { command: Command::Run { scenario, out, seed, quiet } } = Cli::parse();
    let started = Instant::now();
    let text = match std::fs::read_to_string(&scenario) {
        Ok(t) => t,
        Err(e) => return fail(RunError::Io { path: scenario, message: e.to_string() }),
    };
    let mut parsed = match parse_scenario(&text) {
        Ok(s) => s,
        Err(errs) => return fail(RunError::Validation(errs)),
    };
    if let Some(seed) = seed {
        parsed.seed = seed;
    }
    let dir = out
        .or_else(|| parsed.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run(&parsed, &dir) {
        Ok(report) => {
            if !quiet {
                println!("mode: {}", report.mode);
                println!("status: {}", serde_json::to_value(report.status).unwrap_or_default().as_str().unwrap_or(""));
                for name in &report.outputs {
                    println!("wrote {}", dir.join(name).display());
                }
                println!("wall time: {:.3} s", started.elapsed().as_secs_f64());
            }
            ExitCode::from(report.status.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}
