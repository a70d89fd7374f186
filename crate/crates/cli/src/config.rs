use std::path::{Path, PathBuf};

use jumpsas_core::KernelFamily;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FigDivergence,
    FigCrossover,
    FigKernels,
    Analyze,
    VerifyTheory,
    /// Writes a synthetic dataset from a registry test function.
    Generate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FigDivergence => "fig-divergence",
            Command::FigCrossover => "fig-crossover",
            Command::FigKernels => "fig-kernels",
            Command::Analyze => "analyze",
            Command::VerifyTheory => "verify-theory",
            Command::Generate => "generate",
        }
    }
}

/// One experiment run. Empty lists mean "use the experiment's defaults";
/// [`ExperimentConfig::resolved`] fills them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Command>,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub kernels: Vec<KernelFamily>,
    pub functions: Vec<String>,
    pub replicates: usize,
    pub radii: Vec<f64>,
    /// `n_g` values for the divergence table.
    pub grid: Vec<usize>,
    /// Divergence table of the constant function instead of the step.
    pub constant: bool,
    pub mc_samples: usize,
    pub knn_k: usize,
    pub k_folds: usize,
    pub sir_slices: usize,
    pub input: Option<PathBuf>,
    pub ranges: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub paper_mode: bool,
    pub plot_data: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            sizes: Vec::new(),
            dims: Vec::new(),
            kernels: Vec::new(),
            functions: Vec::new(),
            replicates: 30,
            radii: Vec::new(),
            grid: Vec::new(),
            constant: false,
            mc_samples: 10_000,
            knn_k: 5,
            k_folds: 10,
            sir_slices: 10,
            input: None,
            ranges: None,
            out: None,
            paper_mode: false,
            plot_data: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Command) -> Self {
        Self {
            experiment: Some(experiment),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn command(&self) -> CliResult<Command> {
        self.experiment
            .ok_or_else(|| CliError::input("no experiment given in the config or on the command line"))
    }

    /// Copy with every experiment default filled in, validated.
    pub fn resolved(&self) -> CliResult<Self> {
        let mut c = self.clone();
        let cmd = c.command()?;
        let fill = |v: &mut Vec<usize>, d: &[usize]| {
            if v.is_empty() {
                *v = d.to_vec();
            }
        };
        match cmd {
            Command::FigDivergence => {
                if c.grid.is_empty() {
                    c.grid = (2..=100).collect();
                }
            }
            Command::FigCrossover => {
                fill(&mut c.sizes, &[10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
                if c.kernels.is_empty() {
                    c.kernels = vec![KernelFamily::Matern32];
                }
            }
            Command::FigKernels => {
                fill(&mut c.sizes, &[50, 100, 150, 200]);
                fill(&mut c.dims, &[3, 5, 7]);
                if c.kernels.is_empty() {
                    c.kernels = KernelFamily::ALL.to_vec();
                }
                if c.functions.is_empty() {
                    c.functions = ["f1", "f2", "f3", "f4"].map(String::from).to_vec();
                }
            }
            Command::Analyze => {
                if c.kernels.is_empty() {
                    c.kernels = vec![KernelFamily::Matern32];
                }
            }
            Command::VerifyTheory => {}
            Command::Generate => {
                fill(&mut c.sizes, &[300]);
                fill(&mut c.dims, &[5]);
                if c.functions.is_empty() {
                    c.functions = vec!["f3".into()];
                }
            }
        }
        c.validate(cmd)?;
        Ok(c)
    }

    fn validate(&self, cmd: Command) -> CliResult<()> {
        let bad = |m: String| Err(CliError::input(m));
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if matches!(cmd, Command::FigCrossover | Command::FigKernels | Command::Generate) && self.sizes.is_empty() {
            return bad("sizes must not be empty".into());
        }
        if let Some(&n) = self.grid.iter().find(|&&n| n < 2) {
            return bad(format!("grid value {n} is below 2"));
        }
        if let Some(&r) = self.radii.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
            return bad(format!("radius {r} must be positive"));
        }
        if let Some(&p) = self.dims.iter().find(|&&p| p == 0) {
            return bad(format!("dimension {p} must be positive"));
        }
        if self.mc_samples < 100 {
            return bad("mc_samples must be at least 100".into());
        }
        if self.knn_k < 1 || self.k_folds < 2 || self.sir_slices < 1 {
            return bad("knn_k, k_folds and sir_slices must be positive, with at least two folds".into());
        }
        if cmd == Command::Analyze && self.input.is_none() {
            return bad("analyze needs an input CSV".into());
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, with the
    /// output directory left out so that the same run in two places gets
    /// the same name.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
