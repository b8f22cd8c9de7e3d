mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ModeName, OracleMode, RunConfig, ThetaMode};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "lowrank-csd", version, about = "Multilevel low-rank solver for charged-particle transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isotropic line source on [-1.5, 1.5]^2.
    Linesource(RunArgs),
    /// Electron beam through a CT slice (PGM image or density CSV).
    CtPlan(CtArgs),
    /// Fourier amplification, stencil diagonalisation and streaming norm history.
    StabilityCheck(StabilityArgs),
    /// Differences between two field CSV files.
    Compare { a: PathBuf, b: PathBuf },
    /// Dominant spatial and directional modes of a stored component.
    ExportModes(ModesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file merged over the subcommand defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    levels: Option<usize>,
    /// Adaptive rank with a relative truncation tolerance.
    #[arg(long, conflicts_with_all = ["theta_abs", "rank"])]
    theta_rel: Option<f64>,
    /// Adaptive rank with an absolute truncation tolerance.
    #[arg(long, conflicts_with = "rank")]
    theta_abs: Option<f64>,
    /// Fixed rank.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    r_min: Option<usize>,
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    cfl_safety: Option<f64>,
    /// Also march the dense reference.
    #[arg(long, value_parser = ["none", "split", "unsplit"])]
    oracle: Option<String>,
    #[arg(long)]
    allow_slow: bool,
    #[arg(long)]
    vtk: bool,
    /// Stop with a snapshot as soon as the total norm grows.
    #[arg(long)]
    enforce_stability: bool,
    #[arg(long, env = "DLRA_OUTPUT_DIR")]
    output: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct CtArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    image: Option<PathBuf>,
    /// Pixel size in cm; 0 spreads the image width over 14.5 cm.
    #[arg(long)]
    cell_size: Option<f64>,
}

#[derive(Args)]
struct StabilityArgs {
    /// Courant number dt * lambda_max / dx.
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = 720)]
    samples: usize,
    #[arg(long, default_value_t = 16)]
    cells: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModesArgs {
    /// Output directory of an earlier run.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value = "collided")]
    component: String,
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn resolve(defaults: RunConfig, a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = match &a.config {
        Some(path) => defaults.load_over(path)?,
        None => defaults,
    };
    let s = &mut c.solver;
    if let Some(v) = a.levels {
        s.levels = v;
    }
    if let Some(v) = a.theta_rel {
        (s.mode, s.theta_mode, s.theta) = (ModeName::Adaptive, ThetaMode::Relative, v);
    }
    if let Some(v) = a.theta_abs {
        (s.mode, s.theta_mode, s.theta) = (ModeName::Adaptive, ThetaMode::Absolute, v);
    }
    if let Some(v) = a.rank {
        (s.mode, s.rank) = (ModeName::Fixed, v);
    }
    if let Some(v) = a.r_min {
        s.r_min = v;
    }
    if let Some(v) = a.r_max {
        s.r_max = v;
    }
    if a.t_end.is_some() {
        s.t_end = a.t_end;
    }
    if a.max_steps.is_some() {
        s.max_steps = a.max_steps;
    }
    if let Some(v) = a.cfl_safety {
        s.cfl_safety = v;
    }
    s.enforce_stability |= a.enforce_stability;
    if let Some(v) = a.cells {
        c.grid.cells = v;
    }
    if let Some(v) = a.degree {
        c.angular.degree = v;
    }
    if let Some(v) = a.quad_order {
        c.angular.quad_order = v;
    }
    if let Some(v) = &a.oracle {
        c.output.oracle = match v.as_str() {
            "split" => OracleMode::Split,
            "unsplit" => OracleMode::Unsplit,
            _ => OracleMode::None,
        };
    }
    c.output.allow_slow |= a.allow_slow;
    c.output.vtk |= a.vtk;
    if let Some(v) = &a.output {
        c.output.dir = v.display().to_string();
    }
    Ok(c)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Linesource(a) => {
            let cfg = resolve(RunConfig::linesource_defaults(), &a)?;
            if a.dump_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            commands::linesource(&cfg)
        }
        Command::CtPlan(a) => {
            let mut cfg = resolve(RunConfig::ct_defaults(), &a.run)?;
            if let Some(p) = &a.image {
                cfg.input.image = Some(p.display().to_string());
            }
            if let Some(h) = a.cell_size {
                cfg.grid.cell_size = h;
            }
            if a.run.dump_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            commands::ct_plan(&cfg)
        }
        Command::StabilityCheck(a) => commands::stability_check(&commands::StabilityOptions {
            nu: a.nu,
            samples: a.samples,
            cells: a.cells,
            degree: a.degree,
            rank: a.rank,
            steps: a.steps,
            seed: a.seed,
            output: a.output,
        }),
        Command::Compare { a, b } => commands::compare(&a, &b),
        Command::ExportModes(a) => commands::export_modes(&a.run, &a.component, a.count, a.output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Runtime { snapshot: Some(path), .. } = &e {
                eprintln!("snapshot of the last valid state: {}", path.display());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
