use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lightdd::config::{ExperimentConfig, WORKERS_ENV};
use lightdd::converge::{convergence_study, write_report, Knob};
use lightdd::output::CSV_SCHEMAS;
use lightdd::pipeline::{Stage, StageError, StageExt};
use lightdd::{cache, plot};

#[derive(Parser)]
#[command(name = "lightdd", version, about = "Light-induced dipole-dipole broadening of a pancake condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the figure CSVs.
    #[command(after_help = CSV_SCHEMAS)]
    Run {
        /// TOML config; defaults are used for missing keys.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Overrides `output.directory`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Repeat the reference point across values of one numerical knob.
    Converge {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// grid-spacing (nm), padding, stack-m (images per side) or dtau (ns).
        #[arg(short, long)]
        knob: Knob,
        #[arg(short, long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Relative change accepted as converged.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Write matplotlib scripts next to existing CSVs.
    Plot {
        /// Output directory of a previous run.
        dir: PathBuf,
    },
    /// Inspect or clear the ground-state cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
        #[arg(short, long, global = true)]
        config: Option<PathBuf>,
        /// Cache directory; overrides the config.
        #[arg(short, long, global = true)]
        dir: Option<PathBuf>,
    },
    /// Print the default configuration.
    Defaults,
}

#[derive(Subcommand)]
enum CacheAction {
    Inspect,
    Clear,
}

fn load(config: Option<&PathBuf>, output: Option<PathBuf>) -> Result<ExperimentConfig, StageError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p).stage(Stage::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = output {
        cfg.output.directory = o;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(config.as_ref(), output)?;
            log::info!("{} workers ({} overrides)", cfg.workers(), WORKERS_ENV);
            let summary = lightdd::run(&cfg)?;
            println!(
                "wrote {} (dipole {:.3} D, {:.2} photons per atom)",
                summary.output_directory.display(),
                summary.dipole_debye,
                summary.photons_per_atom
            );
        }
        Command::Converge { config, output, knob, values, tolerance } => {
            let cfg = load(config.as_ref(), output)?;
            let report = convergence_study(&cfg, knob, &values, tolerance)?;
            let (csv, _) = write_report(&cfg, &report).stage(Stage::Output)?;
            println!("{} study: converged = {} ({})", knob.name(), report.converged, csv.display());
            for note in &report.notes {
                println!("  {note}");
            }
        }
        Command::Plot { dir } => {
            for p in plot::emit_plot_scripts(&dir).stage(Stage::Plot)? {
                println!("{}", p.display());
            }
        }
        Command::Cache { action, config, dir } => {
            let cfg = load(config.as_ref(), None)?;
            let dir = dir.unwrap_or_else(|| cfg.cache_dir());
            match action {
                CacheAction::Inspect => {
                    let entries = cache::inspect(&dir).stage(Stage::Cache)?;
                    if entries.is_empty() {
                        println!("no cached ground states in {}", dir.display());
                    }
                    for e in entries {
                        println!("{}  N={}  mu={:.1} Hz  {} bytes", e.digest, e.atoms, e.chemical_potential_hz, e.bytes);
                    }
                }
                CacheAction::Clear => {
                    let n = cache::clear(&dir).stage(Stage::Cache)?;
                    println!("removed {n} files from {}", dir.display());
                }
            }
        }
        Command::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml().stage(Stage::Config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
