use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdr_cli::{run_file, Command, Overrides, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "fdr", version, about = "Finite-dimensional forward-curve model checks and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the risk-neutral drift at each sampled state and report residuals.
    CheckDrift(Common),
    /// Probe the consistency condition across several volatility matrices.
    SccProbe(Common),
    /// Estimate the rank of the sampled curve family.
    DetectAffine(Common),
    /// Simulate factor paths and write them to paths.bin and paths.csv.
    Simulate(Common),
    /// Price futures contracts at time zero.
    Price(Common),
    /// Test simulated futures prices for zero drift.
    MartingaleTest(Common),
    /// Estimate the factor covariance from observed or simulated paths.
    EstimateVol(Common),
    /// Rebuild curve values from the probed second-order coefficients.
    Reconstruct(Common),
    /// Estimate volatility, then check the model supports it.
    SccLoop(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Defaults to the scenario's `output_dir`, then $FDR_OUTPUT_DIR, then ./fdr-out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::CheckDrift(c) => (Command::CheckDrift, c),
            Sub::SccProbe(c) => (Command::SccProbe, c),
            Sub::DetectAffine(c) => (Command::DetectAffine, c),
            Sub::Simulate(c) => (Command::Simulate, c),
            Sub::Price(c) => (Command::Price, c),
            Sub::MartingaleTest(c) => (Command::MartingaleTest, c),
            Sub::EstimateVol(c) => (Command::EstimateVol, c),
            Sub::Reconstruct(c) => (Command::Reconstruct, c),
            Sub::SccLoop(c) => (Command::SccLoop, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = cli.command.split();
    let overrides = Overrides {
        seed: args.seed,
        n_paths: args.n_paths,
        tolerance: args.tolerance,
        output_dir: args.output_dir,
    };
    let env_dir = std::env::var(OUTPUT_DIR_ENV).ok();
    match run_file(command, &args.scenario, &overrides, env_dir.as_deref()) {
        Ok(r) => {
            for line in &r.verdicts {
                println!("{line}");
            }
            ExitCode::from(r.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fdr {command}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
