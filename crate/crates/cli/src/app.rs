//! Argument parsing and command dispatch.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use paramid_core::registry::{builtin_systems, ModeChoice};
use paramid_core::Error;

use crate::config::{Config, PerturbationSpec, SystemRef};
use crate::pipeline::{self, CommandOutput, Stage, StageError, StageResult};
use crate::report::{experiment_csv, path_csv, to_json};

#[derive(Debug, Parser)]
#[command(name = "paramid", version, about = "Local identifiability of parameter-functions in ODE systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    K,
    H,
    Auto,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Builtin system name (see `list-systems`).
    #[arg(long, global = true, conflicts_with = "config")]
    pub system: Option<String>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Analysis grid points.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: observation set, certificates, mininorm path, experiment.
    Analyze,
    /// Observation set only.
    Theta,
    /// Class certificates for the given perturbations.
    CheckClass {
        /// Perturbation Δp; components separated by `;`. Repeatable.
        #[arg(long = "perturbation")]
        perturbations: Vec<String>,
    },
    /// Compare the reference parameter with `--param`.
    Distinguish {
        /// Perturbation Δp = p − p₀; components separated by `;`.
        #[arg(long)]
        param: String,
        /// Observation times (comma separated); defaults to Θ.
        #[arg(long, value_delimiter = ',')]
        at: Option<Vec<f64>>,
    },
    /// Certification and distinguishability over directions × ε.
    Sweep {
        /// Direction expression. Repeatable.
        #[arg(long = "direction")]
        directions: Vec<String>,
        /// ε values (comma separated).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// μA(t) and the one-sided slopes at rank drops.
    MininormPath,
    /// Names of the builtin systems.
    ListSystems,
}

fn components(s: &str) -> Vec<String> {
    s.split(';').map(|c| c.trim().to_string()).collect()
}

fn input_error(stage: Stage, msg: impl Into<String>) -> StageError {
    StageError {
        stage,
        error: Error::InvalidInput(msg.into()),
    }
}

/// Assembles the configuration from `--config` and flags; flags win.
pub fn load_config(common: &CommonArgs) -> StageResult<Config> {
    let mut cfg = match (&common.config, &common.system) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| input_error(Stage::Config, format!("{}: {e}", path.display())))?;
            Config::from_json(&text).map_err(|error| StageError {
                stage: Stage::Config,
                error,
            })?
        }
        (None, Some(name)) => Config::for_system(SystemRef::Builtin(name.clone())),
        (None, None) => return Err(input_error(Stage::Config, "one of --system or --config is required")),
    };
    if let Some(g) = common.grid {
        cfg.grid = g;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(m) = common.mode {
        cfg.mode = Some(match m {
            ModeArg::K => ModeChoice::K,
            ModeArg::H => ModeChoice::H,
            ModeArg::Auto => ModeChoice::Auto,
        });
    }
    Ok(cfg)
}

/// Runs the command and returns its text output and exit code.
pub fn render(cli: &Cli) -> StageResult<(String, i32)> {
    if let Command::ListSystems = cli.command {
        let names: Vec<String> = builtin_systems()
            .into_iter()
            .map(|s| format!("{}\tn={} l={} mode={:?}", s.name, s.n, s.l, s.mode()))
            .collect();
        return Ok((names.join("\n") + "\n", 0));
    }
    let mut cfg = load_config(&cli.common)?;
    let out: CommandOutput = match &cli.command {
        Command::Analyze => pipeline::run_pipeline(cfg)?,
        Command::Theta => pipeline::run_theta(cfg)?,
        Command::CheckClass { perturbations } => {
            if !perturbations.is_empty() {
                cfg.perturbations = perturbations
                    .iter()
                    .map(|p| PerturbationSpec {
                        name: p.clone(),
                        dp: components(p),
                    })
                    .collect();
            }
            pipeline::run_check_class(cfg)?
        }
        Command::Distinguish { param, at } => pipeline::run_distinguish(cfg, &components(param), at.clone())?,
        Command::Sweep { directions, eps } => {
            if !directions.is_empty() {
                cfg.experiment.directions = directions.clone();
            }
            if let Some(e) = eps {
                cfg.experiment.epsilons = e.clone();
            }
            pipeline::run_sweep(cfg)?
        }
        Command::MininormPath => pipeline::run_mininorm(cfg)?,
        Command::ListSystems => unreachable!("handled above"),
    };
    let text = match cli.common.format {
        Format::Json => to_json(&out.report).map_err(|e| input_error(Stage::Output, e.to_string()))?,
        Format::Csv => match (&out.path_columns, &out.report.experiment) {
            (Some((t, d, m)), _) => path_csv(t, d, m).map_err(|e| input_error(Stage::Output, e.to_string()))?,
            (None, Some(exp)) => experiment_csv(exp).map_err(|e| input_error(Stage::Output, e.to_string()))?,
            _ => return Err(input_error(Stage::Output, "this command has no CSV output")),
        },
    };
    Ok((text, out.exit_code))
}

/// Runs the command and writes its output to `--out` or stdout.
pub fn execute(cli: &Cli) -> StageResult<i32> {
    let (text, code) = render(cli)?;
    match &cli.common.out {
        Some(path) => fs::write(path, text).map_err(|e| input_error(Stage::Output, format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(code)
}
