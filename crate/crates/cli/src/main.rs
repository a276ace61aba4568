//! `magrest`: design, analysis and simulation pipelines with file artifacts.

mod artifacts;
mod commands;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magrest_core::config::ProjectConfig;
use magrest_core::Error;

#[derive(Parser, Debug)]
#[command(name = "magrest", version, about = "Rotary actuator drive and position-control toolkit")]
pub struct Cli {
    /// Project config (JSON); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `control.zeta=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Series format for commands that emit responses or traces.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Grid {
    /// Lowest frequency, Hz.
    #[arg(long, default_value_t = 1.0)]
    f_lo: f64,
    /// Highest frequency, Hz.
    #[arg(long, default_value_t = 1e7)]
    f_hi: f64,
    #[arg(long, default_value_t = 50)]
    per_decade: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BodeTarget {
    /// Current-loop transmission `L = PCH`.
    Loop,
    /// Coil admittance.
    Plant,
    /// Closed current loop, gang 1.
    Closed,
    /// Sensitivity, gang 4.
    Sensitivity,
    /// Position loop of the configured architecture.
    Position,
    /// Feedback-linearized loop transmission with velocity filter.
    Fl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    PolePlace,
    FeedbackLin,
    OpenLoop,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::PolePlace => "pole-place",
            ControllerKind::FeedbackLin => "feedback-lin",
            ControllerKind::OpenLoop => "open-loop",
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SimOpts {
    #[arg(long, value_enum, default_value_t = ControllerKind::PolePlace)]
    controller: ControllerKind,
    /// Replace the analog current loop by an ideal current source.
    #[arg(long)]
    ideal_current: bool,
    /// Integrate the linearized plant instead of the nonlinear one.
    #[arg(long)]
    linear: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Size the lead-lag compensator from the `lead_lag` targets.
    Design,
    /// Six gangs of the current loop plus a summary record.
    Gangs {
        #[command(flatten)]
        grid: Grid,
    },
    /// Frequency response of one transfer function.
    Bode {
        #[arg(long, value_enum, default_value_t = BodeTarget::Loop)]
        target: BodeTarget,
        #[command(flatten)]
        grid: Grid,
    },
    /// Stability margins of the current loop and the position loops.
    Margins,
    /// Pole-placement design record for the configured architecture.
    Poleplace,
    /// Hybrid time-domain simulation.
    Simulate {
        #[command(flatten)]
        opts: SimOpts,
    },
    /// Closed-loop position response from square-wave runs, in parallel.
    Sweep {
        #[command(flatten)]
        opts: SimOpts,
        #[arg(long, default_value_t = 10.0)]
        f_lo: f64,
        #[arg(long, default_value_t = 2e3)]
        f_hi: f64,
        #[arg(long, default_value_t = 5)]
        per_decade: usize,
        /// Periods correlated per point.
        #[arg(long, default_value_t = 5)]
        cycles: u32,
    },
    /// Full reproduction run: one JSON record plus plots.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Gangs { .. } => "gangs",
            Command::Bode { .. } => "bode",
            Command::Margins => "margins",
            Command::Poleplace => "poleplace",
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Report => "report",
        }
    }

    fn formats(&self) -> &'static [Format] {
        match self {
            Command::Gangs { .. } | Command::Bode { .. } | Command::Simulate { .. } | Command::Sweep { .. } => {
                &[Format::Csv, Format::Json, Format::Svg]
            }
            _ => &[Format::Json],
        }
    }
}

fn config_error(path: &str, msg: impl Into<String>) -> anyhow::Error {
    Error::Config { path: path.into(), msg: msg.into() }.into()
}

fn load_config(cli: &Cli) -> anyhow::Result<ProjectConfig> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?;
            ProjectConfig::from_json(&text)?
        }
        None => ProjectConfig::default(),
    };
    Ok(base.with_overrides(&cli.set)?)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let format = cli.format.unwrap_or(cli.command.formats()[0]);
    if !cli.command.formats().contains(&format) {
        return Err(config_error("--format", format!("`{}` does not emit {}", cli.command.name(), format!("{format:?}").to_lowercase())));
    }
    let cfg = load_config(cli)?;
    let warnings = cfg.validate()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut art = artifacts::Artifacts::create(&dir, &cfg)?;
    art.warnings = warnings;
    let outcome = match &cli.command {
        Command::Design => commands::design(&cfg, &mut art),
        Command::Gangs { grid } => commands::gangs(&cfg, grid, format, &mut art),
        Command::Bode { target, grid } => commands::bode_cmd(&cfg, *target, grid, format, &mut art),
        Command::Margins => commands::margins_cmd(&cfg, &mut art),
        Command::Poleplace => commands::poleplace(&cfg, &mut art),
        Command::Simulate { opts } => commands::simulate_cmd(&cfg, opts, format, &mut art),
        Command::Sweep { opts, f_lo, f_hi, per_decade, cycles } => {
            let grid = Grid { f_lo: *f_lo, f_hi: *f_hi, per_decade: *per_decade };
            commands::sweep(&cfg, opts, &grid, *cycles, format, &mut art)
        }
        Command::Report => commands::report(&cfg, &mut art),
    };
    // partial artifacts are still listed when a run fails
    art.finish(cli.command.name(), &cfg, &cli.set)?;
    outcome
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. }) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
