use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mechrecon_cli::{run_scenario, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "mechrecon", version, about = "Optomechanical state reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize coupling profiles and write g(t) samples.
    DesignProfile(RunArgs),
    /// Fidelity versus sample count.
    ReconstructSweep(RunArgs),
    /// Fidelity versus detection loss.
    LossSweep(RunArgs),
    /// Characteristic function on the single-photon ring.
    SinglephotonScan(RunArgs),
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: RunArgs, scenario: Scenario) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.scenario = scenario;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(n) = cfg.workers.filter(|&n| n > 1) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker pool")?;
    }
    let manifest = run_scenario(&cfg, &args.out)?;
    for note in &manifest.notes {
        eprintln!("note: {note}");
    }
    for f in &manifest.files {
        println!("{} ({} rows) sha256 {}", args.out.join(&f.name).display(), f.rows, f.sha256);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::DesignProfile(a) => run(a, Scenario::DesignProfile),
        Command::ReconstructSweep(a) => run(a, Scenario::ReconstructSweep),
        Command::LossSweep(a) => run(a, Scenario::LossSweep),
        Command::SinglephotonScan(a) => run(a, Scenario::SinglephotonScan),
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let basis = cfg.basis()?;
            println!("ok: {} on {} mode(s), nu = {:?}", cfg.scenario.name(), basis.n_modes(), basis.nu());
            Ok(())
        }
    }
}
