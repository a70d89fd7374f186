use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jumpsas_cli::{run, CliError, Command, ExperimentConfig};

/// Surrogate active subspaces for smooth and jump-discontinuous simulators.
#[derive(Debug, Parser)]
#[command(name = "jumpsas", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Flat JSON experiment configuration. Omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Take the truncation dimension of the bake-off from the full data.
    #[arg(long)]
    paper_mode: bool,
    /// Also write pre-binned series for plotting.
    #[arg(long)]
    plot_data: bool,
}

fn config_from(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = Some(args.command);
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    cfg.paper_mode |= args.paper_mode;
    cfg.plot_data |= args.plot_data;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = config_from(&args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok((report, paths)) => {
            for line in &report.summary {
                println!("{line}");
            }
            for p in &paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("jumpsas: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
