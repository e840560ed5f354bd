use clap::{Args, Parser, Subcommand};
use ptomo::{Command, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulate a two-qubit open process probed by projective interventions,
/// reconstruct it by tomography and quantify its memory.
#[derive(Parser)]
#[command(name = "ptomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Process tomography of the 18 projective measurements.
    CharacterizePovm,
    /// χ matrices of CZ, CNOT and the reduced CZ maps.
    ReducedMaps,
    /// Fit the process tensor and compare both predictors on the 18x18 grid.
    TomoPredict,
    /// Non-Markovianity of the last step over the θ grid.
    Nonmarkov,
    /// Output Bloch clouds of the last step for both predictors.
    Volume,
}

#[derive(Args)]
struct Opts {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// cnot-cz or cz-cnot.
    #[arg(long, global = true)]
    process: Option<String>,
    /// Shots per setting; omit for exact probabilities.
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Amplitude-damping strength after each gate (0.01 if only --noise-lambda is given).
    #[arg(long, global = true)]
    noise_gamma: Option<f64>,
    /// Dephasing strength after each gate (0.01 if only --noise-gamma is given).
    #[arg(long, global = true)]
    noise_lambda: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated θ values in radians.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    theta_grid: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::CharacterizePovm => Command::CharacterizePovm,
        Sub::ReducedMaps => Command::ReducedMaps,
        Sub::TomoPredict => Command::TomoPredict,
        Sub::Nonmarkov => Command::Nonmarkov,
        Sub::Volume => Command::Volume,
    };
    let o = cli.opts;
    let over = Overrides {
        process: o.process,
        shots: o.shots,
        seed: o.seed,
        noise_gamma: o.noise_gamma,
        noise_lambda: o.noise_lambda,
        output_dir: o.out,
        theta_grid: o.theta_grid,
    };
    let result = RunConfig::load(o.config.as_deref(), &over).and_then(|cfg| {
        let outcome = ptomo::run(command, &cfg)?;
        Ok((cfg, outcome))
    });
    match result {
        Ok((cfg, outcome)) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("{} files written to {}", outcome.artifacts.len(), cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ptomo {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
