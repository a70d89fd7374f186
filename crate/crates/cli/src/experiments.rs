use jumpsas_core::asm::{importance, mc_active_subspace, pwl_active_subspace_1d, subspace_error};
use jumpsas_core::data::{load_dataset, read_ranges};
use jumpsas_core::discas::checks::{run_all, CheckResult, TheoryConfig};
use jumpsas_core::gp::fit;
use jumpsas_core::reduce::{bakeoff, surrogate_report, BakeoffConfig, BakeoffResult};
use jumpsas_core::rng::{derive_seed, rng, uniform_design};
use jumpsas_core::testfn::{heaviside_1d, mixed_2d};
use jumpsas_core::{Dataset, KernelFamily, PiecewiseSmooth, SubspaceReport, TestFunction};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Extra attempts after a failed surrogate fit, each with a fresh sub-seed.
pub const FIT_RETRIES: u64 = 3;

pub(crate) fn seed_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| derive_seed(s, i))
}

fn with_retries<T>(seed: u64, mut attempt: impl FnMut(u64) -> jumpsas_core::Result<T>) -> Option<T> {
    (0..=FIT_RETRIES).find_map(|a| attempt(derive_seed(seed, a)).ok())
}

pub(crate) fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Linear-interpolation quantile of the sorted sample. NaN when empty.
pub(crate) fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let h = q * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRow {
    pub n_g: usize,
    pub estimate: f64,
}

/// Active subspace of the piecewise-linear interpolant of the unit step at
/// 0.5 (or of a constant) over each grid size.
pub fn fig_divergence(cfg: &ExperimentConfig) -> CliResult<Vec<DivergenceRow>> {
    let constant = cfg.constant;
    cfg.grid
        .iter()
        .map(|&n_g| {
            let estimate = if constant {
                pwl_active_subspace_1d(|_| 1.0, n_g)?
            } else {
                pwl_active_subspace_1d(|x| heaviside_1d(x, 0.5, 1.0), n_g)?
            };
            Ok(DivergenceRow { n_g, estimate })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverRow {
    pub n: usize,
    /// Per-replicate importances of x1 (the jump) and x2 (the smooth part).
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub excluded: usize,
}

impl CrossoverRow {
    pub fn mean_x1(&self) -> f64 {
        mean(&self.x1)
    }

    pub fn mean_x2(&self) -> f64 {
        mean(&self.x2)
    }

    pub fn diffs(&self) -> Vec<f64> {
        self.x1.iter().zip(&self.x2).map(|(a, b)| a - b).collect()
    }

    pub fn median_diff(&self) -> f64 {
        median(&self.diffs())
    }
}

/// Importance of the jump and smooth directions of the mixed 2D function
/// under surrogate active subspaces, for growing design sizes.
pub fn fig_crossover(cfg: &ExperimentConfig) -> CliResult<Vec<CrossoverRow>> {
    let kernel = cfg.kernels.first().copied().unwrap_or(KernelFamily::Matern32);
    let jobs: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.replicates as u64).map(move |r| (n, r)))
        .collect();
    let results: Vec<Option<[f64; 2]>> = jobs
        .par_iter()
        .map(|&(n, rep)| {
            with_retries(seed_path(cfg.seed, &[n as u64, rep]), |s| {
                let x = uniform_design(&mut rng(derive_seed(s, 0)), n, 2);
                let data = Dataset::from_fn(x, mixed_2d)?;
                let model = fit(&data, kernel, derive_seed(s, 1))?;
                let imp = importance(&mc_active_subspace(&model, cfg.mc_samples, derive_seed(s, 2))?);
                if imp.degenerate {
                    return Err(jumpsas_core::Error::Degenerate("flat surrogate".into()));
                }
                Ok([imp.values[0], imp.values[1]])
            })
        })
        .collect();
    let mut rows: Vec<CrossoverRow> = cfg
        .sizes
        .iter()
        .map(|&n| CrossoverRow {
            n,
            x1: Vec::new(),
            x2: Vec::new(),
            excluded: 0,
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        let row = &mut rows[i / cfg.replicates];
        match r {
            Some([a, b]) => {
                row.x1.push(a);
                row.x2.push(b);
            }
            None => row.excluded += 1,
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub function: String,
    pub dim: usize,
    pub n: usize,
    pub kernel: KernelFamily,
    pub errors: Vec<f64>,
    pub excluded: usize,
}

impl KernelRow {
    pub fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }

    pub fn std_error(&self) -> f64 {
        std_error(&self.errors)
    }
}

/// Subspace error of surrogate active subspaces on ridge functions with a
/// random direction, per function, dimension, design size and kernel. All
/// kernels of one replicate see the same direction and design.
pub fn fig_kernels(cfg: &ExperimentConfig) -> CliResult<Vec<KernelRow>> {
    for f in &cfg.functions {
        if jumpsas_core::RidgeKind::parse(f).is_none() {
            return Err(CliError::input(format!("`{f}` is not a ridge function (expected f1..f4)")));
        }
    }
    let mut cells = Vec::new();
    for (fi, f) in cfg.functions.iter().enumerate() {
        for &p in &cfg.dims {
            for &n in &cfg.sizes {
                cells.push((fi, f.clone(), p, n));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates as u64).map(move |r| (c, r)))
        .collect();
    let results: Vec<Vec<Option<f64>>> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (fi, ref name, p, n) = cells[c];
            let s = seed_path(cfg.seed, &[fi as u64, p as u64, n as u64, rep]);
            let f = match TestFunction::by_name(name, p, None, derive_seed(s, 0)) {
                Ok(f) => f,
                Err(_) => return vec![None; cfg.kernels.len()],
            };
            let u = f.ridge_direction().expect("ridge functions carry a direction").to_vec();
            cfg.kernels
                .iter()
                .map(|&k| {
                    with_retries(derive_seed(s, 1), |sa| {
                        let x = uniform_design(&mut rng(derive_seed(sa, 0)), n, p);
                        let data = Dataset::from_fn(x, |x| f.eval(x))?;
                        let model = fit(&data, k, derive_seed(sa, 1))?;
                        subspace_error(&mc_active_subspace(&model, cfg.mc_samples, derive_seed(sa, 2))?, &u)
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for (c, (_, name, p, n)) in cells.iter().enumerate() {
        for (ki, &kernel) in cfg.kernels.iter().enumerate() {
            let mut row = KernelRow {
                function: name.clone(),
                dim: *p,
                n: *n,
                kernel,
                errors: Vec::new(),
                excluded: 0,
            };
            for rep in 0..cfg.replicates {
                match results[c * cfg.replicates + rep][ki] {
                    Some(e) => row.errors.push(e),
                    None => row.excluded += 1,
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub data: Dataset,
    pub kernel: KernelFamily,
    pub report: SubspaceReport,
    pub bakeoff: Option<BakeoffResult>,
    pub status: String,
}

pub fn load_input(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let input = cfg.input.as_deref().ok_or_else(|| CliError::input("no input CSV given"))?;
    let ranges = match &cfg.ranges {
        Some(p) => Some(read_ranges(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?),
        None => None,
    };
    load_dataset(input, ranges.as_deref()).map_err(|e| CliError::input(format!("{}: {e}", input.display())))
}

/// Surrogate active subspace of a user dataset plus the cross-validated
/// prediction comparison.
pub fn analyze(cfg: &ExperimentConfig) -> CliResult<AnalyzeOutcome> {
    let data = load_input(cfg)?;
    let kernel = cfg.kernels.first().copied().unwrap_or(KernelFamily::Matern32);
    let report = surrogate_report(&data, kernel, cfg.mc_samples, derive_seed(cfg.seed, 0))?;
    let (bakeoff, status) = if report.degenerate {
        (None, "skipped: the surrogate gradient vanishes, so no projection can be built".to_string())
    } else if data.len() < cfg.k_folds.max(cfg.knn_k + 1) {
        (None, format!("skipped: {} rows are too few for {}-fold cross-validation", data.len(), cfg.k_folds))
    } else {
        let bc = BakeoffConfig {
            kernel,
            mc_samples: cfg.mc_samples,
            sir_slices: cfg.sir_slices,
            knn_k: cfg.knn_k,
            k_folds: cfg.k_folds,
            paper_mode: cfg.paper_mode,
        };
        (Some(bakeoff(&data, &bc, derive_seed(cfg.seed, 1))?), "ok".to_string())
    };
    Ok(AnalyzeOutcome {
        data,
        kernel,
        report,
        bakeoff,
        status,
    })
}

/// Theory checks, once per configured radius (or once at the defaults).
/// Names carry the radius when one is given.
pub fn verify_theory(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let base = TheoryConfig {
        seed: cfg.seed,
        ..TheoryConfig::default()
    };
    if cfg.radii.is_empty() {
        return run_all(&base);
    }
    cfg.radii
        .iter()
        .flat_map(|&r| {
            run_all(&base.clone().with_radius(r)).into_iter().map(move |mut c| {
                c.name = format!("r={r}/{}", c.name);
                c
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub function: TestFunction,
    pub data: Dataset,
}

/// Uniform design evaluated on a registry test function.
pub fn generate(cfg: &ExperimentConfig) -> CliResult<Generated> {
    let name = &cfg.functions[0];
    let p = cfg.dims[0];
    let n = cfg.sizes[0];
    let function = TestFunction::by_name(name, p, None, derive_seed(cfg.seed, 0))?;
    let x = uniform_design(&mut rng(derive_seed(cfg.seed, 1)), n, p);
    let data = Dataset::from_fn(x, |x| function.eval(x))?;
    Ok(Generated { function, data })
}
