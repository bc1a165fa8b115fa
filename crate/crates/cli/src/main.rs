use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drape_cli::commands::{self, gen::Shape};
use drape_cli::config::{split_toggle, Overrides, RunConfig};
use drape_cli::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "drape", version, about = "Quasi-static garment draping with a learned refiner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML scene or run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `gen`, the OBJ file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "DRAPE_THREADS")]
    threads: Option<usize>,
    /// Stage override such as `gnn=off`; repeatable.
    #[arg(long = "toggle", global = true, value_name = "STAGE=on|off")]
    toggles: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drape one scene: OBJ, metrics JSON, solver trace CSV.
    Drape,
    /// Self-supervised training: checkpoint and loss CSV.
    Train,
    /// Mean metrics over held-out scenes for all eight stage combinations.
    Eval {
        /// Checkpoint directory; overrides `checkpoint` in the config.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Every finite-difference gradient suite; nonzero exit on failure.
    Gradcheck,
    /// Per-stage timings at each `bench.T`.
    Bench,
    /// Write a procedural mesh as OBJ.
    Gen {
        #[command(subcommand)]
        shape: GenShape,
        /// Uniform per-axis vertex noise in metres, seeded by `--seed`.
        #[arg(long, global = true, default_value_t = 0.0)]
        jitter: f64,
    },
}

#[derive(Debug, Subcommand)]
enum GenShape {
    Square {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        size: f64,
    },
    Tube {
        #[arg(long, default_value_t = 0.15)]
        radius: f64,
        #[arg(long, default_value_t = 0.5)]
        height: f64,
        #[arg(long, default_value_t = 24)]
        nu: usize,
        #[arg(long, default_value_t = 8)]
        nv: usize,
    },
    Icosphere {
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, default_value_t = 2)]
        subdivisions: usize,
    },
}

fn run_config(cli: &Cli, required: bool, checkpoint: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if required => return Err(CliError::config("--config", "a configuration file is required for this command")),
        None => RunConfig::empty(),
    };
    let toggles = cli.toggles.iter().map(|t| split_toggle(t)).collect::<Result<Vec<_>>>()?;
    cfg.apply(&Overrides { seed: cli.seed, out: cli.out.clone(), checkpoint, toggles })?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    match &cli.command {
        Command::Drape => {
            let out = commands::drape::run(&run_config(&cli, true, None)?)?;
            let r = &out.report;
            println!(
                "{}: E_strain {:.4e} J, E_bend {:.4e} J, B2G {:.4} %, |F| {:.4e} N -> {}",
                r.scene,
                r.e_strain_J,
                r.e_bend_J,
                r.b2g_percent,
                r.residual_force_N,
                out.out_dir.display()
            );
        }
        Command::Train => {
            let run = commands::train::run(&run_config(&cli, false, None)?)?;
            let s = &run.summary;
            println!(
                "{} iterations in {:.1} s: mean loss {:.4e} -> {:.4e}, eta scale {:.4}, delta {:.4} -> {}",
                s.iterations,
                run.elapsed_s,
                s.initial_loss,
                s.final_loss,
                s.eta_scale,
                s.delta,
                run.out_dir.display()
            );
        }
        Command::Eval { checkpoint } => {
            let run = commands::eval::run(&run_config(&cli, false, checkpoint.clone())?)?;
            print!("{}", run.table.pretty());
        }
        Command::Gradcheck => {
            commands::gradcheck::run(cli.seed.unwrap_or(0), cli.out.as_deref())?;
        }
        Command::Bench => {
            let report = commands::bench::run(&run_config(&cli, true, None)?)?;
            print!("{}", report.pretty());
        }
        Command::Gen { shape, jitter } => {
            let out = cli.out.clone().ok_or_else(|| CliError::config("--out", "an output OBJ path is required"))?;
            let shape = match *shape {
                GenShape::Square { n, size } => Shape::Square { n, size },
                GenShape::Tube { radius, height, nu, nv } => Shape::Tube { radius, height, nu, nv },
                GenShape::Icosphere { radius, subdivisions } => Shape::Icosphere { radius, subdivisions },
            };
            let mesh = commands::gen::run(shape, *jitter, cli.seed.unwrap_or(0), &out)?;
            println!("{}: {} vertices, {} faces -> {}", mesh.name, mesh.vertices.len(), mesh.faces.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
