//! Experiment harness behind the `jumpsas` binary.
//!
//! A run is described by one flat JSON [`ExperimentConfig`]. [`execute`]
//! turns it into a [`Report`] of CSV tables and a JSON document, and
//! [`run`] writes those as `<command>_<hash>.{csv,json}` where `hash` is
//! taken over the resolved configuration.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
mod report;

use std::path::PathBuf;

pub use config::{Command, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use output::{Report, Table};

/// Default output directory when neither the config nor the flags name one.
pub const DEFAULT_OUT: &str = "out";

/// Resolves defaults and runs the configured experiment.
pub fn execute(cfg: &ExperimentConfig) -> CliResult<(ExperimentConfig, Report)> {
    let cfg = cfg.resolved()?;
    let report = match cfg.command()? {
        Command::FigDivergence => report::divergence(&cfg, &experiments::fig_divergence(&cfg)?),
        Command::FigCrossover => report::crossover(&cfg, &experiments::fig_crossover(&cfg)?),
        Command::FigKernels => report::kernels(&cfg, &experiments::fig_kernels(&cfg)?),
        Command::Analyze => report::analyze(&cfg, &experiments::analyze(&cfg)?),
        Command::VerifyTheory => report::theory(&experiments::verify_theory(&cfg)),
        Command::Generate => report::generated(&experiments::generate(&cfg)?),
    };
    Ok((cfg, report))
}

/// [`execute`] and write every output file. Returns the report and the
/// written paths.
pub fn run(cfg: &ExperimentConfig) -> CliResult<(Report, Vec<PathBuf>)> {
    let (resolved, report) = execute(cfg)?;
    let dir = resolved.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let cmd = resolved.command()?;
    let paths = output::write_report(&report, &dir, cmd.name(), &resolved.hash(), resolved.seed)?;
    Ok((report, paths))
}
