use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info};

use conefrac_core::config::{Problem, RunConfig};
use conefrac_core::energy::{balance_report, EnergyLedger};
use conefrac_core::output::OutputWriter;
use conefrac_core::sparse;

#[derive(Parser)]
#[command(name = "conefrac", version, about = "Implicit cohesive fracture with a conic interior-point solver")]
struct Cli {
    /// Threads for sparse factorizations (1 = sequential, reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its outputs.
    Run {
        config: PathBuf,
        /// Overrides `output.dir` of the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Stops after this many steps.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Validate a config and its mesh without solving.
    Check { config: PathBuf },
}

fn load(path: &Path) -> Result<(RunConfig, PathBuf)> {
    Ok(RunConfig::load(path)?)
}

fn check(path: &Path) -> Result<()> {
    let (cfg, dir) = load(path)?;
    let p = Problem::build(cfg, &dir)?;
    let m = &p.simulation.model;
    println!("config ok: {}", path.display());
    println!("  nodes {} elements {}", m.fmesh.n_nodes(), m.fmesh.elements.len());
    println!("  interfaces {} gauss points {}", m.fmesh.n_interfaces(), m.n_points());
    println!("  dofs {} constrained {}", m.n_dof(), p.simulation.bc.constrained().len());
    println!("  contact rows {}", m.contact.len());
    println!("  steps {} dt {:e}", p.config.n_step, p.config.dt);
    Ok(())
}

fn run(path: &Path, output_dir: Option<PathBuf>, max_steps: Option<usize>) -> Result<()> {
    let (cfg, dir) = load(path)?;
    let out = output_dir.unwrap_or_else(|| dir.join(&cfg.output.dir));
    let mut p = Problem::build(cfg, &dir)?;
    let writer = OutputWriter::create(&out).with_context(|| format!("creating {}", out.display()))?;
    writer.manifest(&p.config)?;

    let n_step = max_steps.map_or(p.config.n_step, |m| m.min(p.config.n_step));
    let every = p.config.output.every;
    let sim = &mut p.simulation;
    let mut records = vec![sim.initial_record()?];
    let mut failure = None;
    for _ in 0..n_step {
        match sim.step() {
            Ok(rec) => {
                if every > 0 && rec.tau % every == 0 {
                    writer.step(&sim.model, &rec)?;
                }
                records.push(rec);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let constrained = sim.bc.constrained().to_vec();
    let ledger = EnergyLedger::build(&sim.model, &records, &constrained, sim.dt, p.config.output.energy_scale())?;
    writer.energies(&ledger)?;
    if let Some(m) = &p.config.monitor {
        writer.load_deflection(&sim.model, m, &records[1..])?;
    }
    let b = balance_report(&ledger);
    info!("{} steps written to {}; max energy residual {:.3e} of peak work", records.len() - 1, out.display(), b.max_relative);
    match failure {
        Some(e) => Err(anyhow::Error::new(e).context(format!("step {} failed", records.len()))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    sparse::set_threads(cli.threads);
    let path = match &cli.command {
        Command::Run { config, .. } | Command::Check { config } => config.clone(),
    };
    if !path.is_file() {
        eprintln!("error: config not found: {}", path.display());
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, output_dir, max_steps } => run(&config, output_dir, max_steps),
        Command::Check { config } => check(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
