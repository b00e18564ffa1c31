//! Command-line experiments on top of the `kleinsplit` library.
//!
//! Every subcommand reads an [`ExperimentConfig`] (TOML file plus flag
//! overrides), runs one experiment and writes a [`Dataset`] as JSON or CSV.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

pub use config::{ExecMode, ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use export::{Dataset, Format, Value};

use commands::System;

#[derive(Debug, Parser)]
#[command(name = "kleinsplit", version, about = "Experiments on split solvable groups acting on projective space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Stable/unstable splitting of the generator
    Split(Overrides),
    /// Region labels on a two-dimensional slice of the chart
    ClassifyGrid(Overrides),
    /// Torus orbit and its box coverage
    Orbit(Overrides),
    /// Lattice fixed points approximating a target
    FixedPoints(Overrides),
    /// Integrality of sigma·exp(hM)·sigma⁻¹
    LatticeCheck(Overrides),
    /// ‖(I − Bⁿ)⁻¹‖ over a range of n
    NormScan(Overrides),
    /// Round trips and equivariance of the maps ψ±
    PsiCheck(Overrides),
    /// Divergence witness table for a pair of points
    Witness(Overrides),
}

impl Command {
    pub fn overrides(&self) -> &Overrides {
        match self {
            Command::Split(o)
            | Command::ClassifyGrid(o)
            | Command::Orbit(o)
            | Command::FixedPoints(o)
            | Command::LatticeCheck(o)
            | Command::NormScan(o)
            | Command::PsiCheck(o)
            | Command::Witness(o) => o,
        }
    }
}

/// Runs one experiment from an already resolved config.
pub fn execute(command: &Command, cfg: &ExperimentConfig) -> CliResult<Dataset> {
    cfg.validate()?;
    let sys = System::load(cfg)?;
    let work = || match command {
        Command::Split(_) => commands::split(&sys),
        Command::ClassifyGrid(_) => commands::classify_grid(&sys, cfg),
        Command::Orbit(_) => commands::orbit(&sys, cfg),
        Command::FixedPoints(_) => commands::fixed_points(&sys, cfg),
        Command::LatticeCheck(_) => commands::lattice_check(&sys, cfg),
        Command::NormScan(_) => commands::norm_scan(&sys, cfg),
        Command::PsiCheck(_) => commands::psi_check(&sys, cfg),
        Command::Witness(_) => commands::witness(&sys, cfg),
    };
    match cfg.mode() {
        ExecMode::Parallel => work(),
        ExecMode::Serial => rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?
            .install(work),
    }
}

/// Resolves the config, runs, and writes the output. Returns the dataset.
pub fn run(cli: &Cli) -> CliResult<Dataset> {
    let cfg = cli.command.overrides().resolve()?;
    let ds = execute(&cli.command, &cfg)?;
    let format = cfg.format()?;
    match &cfg.output.path {
        Some(path) => {
            export::export(&ds, path, format)?;
        }
        None => {
            let text = match format {
                Format::Json => ds.to_json(),
                Format::Csv => ds.records_csv(),
            };
            std::io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    Ok(ds)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            let _ = err.print();
            return 0;
        }
        Err(err) => {
            let err = CliError::config(err.render().to_string().trim().to_owned());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
