//! Command-line front end: loads a run configuration, applies the
//! overrides, pins the rayon thread pool, and dispatches one analysis
//! subcommand. Exit codes: 0 success, 1 validation failure, 2 numerical
//! failure. Partial artifacts are removed when a run fails.

use clap::{Parser, Subcommand};
use jumpfrac::pipeline;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "jumpfrac",
    about = "Simulation and multifractal analysis of stable-like jump diffusions",
    version
)]
struct Cli {
    /// Run configuration file (strict `key = value` sections)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides run.output_dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides run.master_seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on this (0 = auto)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write path.csv / path.bin
    Simulate,
    /// Sample the driving Poisson system; covering and box-dimension stats
    Points,
    /// Pointwise Holder estimates vs the closed-form exponent
    Holder,
    /// Theoretical or empirical multifractal spectrum curve
    Spectrum,
    /// Rescaled-increment convergence to the stable tangent process
    Tangent,
    /// Exceedance frequencies of the dyadic band statistic
    BandStats,
    /// Probe the admissibility conditions of the jump kernel
    CheckAdmissible,
    /// Monte Carlo rate vs the generator value
    GeneratorCheck,
}

impl Command {
    fn to_pipeline(&self) -> pipeline::Subcommand {
        match self {
            Command::Simulate => pipeline::Subcommand::Simulate,
            Command::Points => pipeline::Subcommand::Points,
            Command::Holder => pipeline::Subcommand::Holder,
            Command::Spectrum => pipeline::Subcommand::Spectrum,
            Command::Tangent => pipeline::Subcommand::Tangent,
            Command::BandStats => pipeline::Subcommand::BandStats,
            Command::CheckAdmissible => pipeline::Subcommand::CheckAdmissible,
            Command::GeneratorCheck => pipeline::Subcommand::GeneratorCheck,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> jumpfrac::Result<ExitCode> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| jumpfrac::Error::invalid("--config <path> is required"))?;
    let mut cfg = jumpfrac::load_config(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.run.master_seed = seed;
        cfg.sim.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.output_dir = out.to_string_lossy().into_owned();
    }
    let threads = cli.threads.unwrap_or(cfg.run.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| jumpfrac::Error::invalid(format!("thread pool: {e}")))?;
    }

    let out_dir = PathBuf::from(&cfg.run.output_dir);
    let output = pipeline::run(cli.command.to_pipeline(), &cfg, &out_dir)?;
    println!("{}", output.summary);
    for f in &output.files {
        println!("  wrote {}", f.display());
    }
    Ok(if output.check_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
