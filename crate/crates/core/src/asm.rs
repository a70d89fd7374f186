//! Active subspaces of surrogates.
//!
//! The integration measure is uniform on `[0,1]^P`. Monte-Carlo sums are
//! accumulated in fixed-size chunks, each with its own derived seed, and the
//! chunk partials are combined by pairwise summation in chunk order; results
//! do not depend on how many worker threads ran the chunks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::gp::GpModel;
use crate::linalg::{columns_of, subspace_cosine, SpectralMatrix};
use crate::rng;

pub const DEFAULT_MC_SAMPLES: usize = 10_000;
const CHUNK: usize = 256;
const DEGENERATE_NORM: f64 = 1e-14;

/// Sums a slice of matrices by recursive halving.
pub(crate) fn pairwise_sum(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    match parts.len() {
        0 => unreachable!("empty partial list"),
        1 => parts[0].clone(),
        n => pairwise_sum(&parts[..n / 2]) + pairwise_sum(&parts[n / 2..]),
    }
}

/// `(1/M)·Σ g(x_i) g(x_i)ᵀ` with `x_i` uniform on the unit cube.
pub fn mc_gradient_outer<G>(dim: usize, samples: usize, seed: u64, grad: G) -> Result<SpectralMatrix>
where
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if samples == 0 || dim == 0 {
        return invalid("need at least one sample and one dimension");
    }
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<DMatrix<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::rng(rng::derive_seed(seed, c as u64));
            let count = CHUNK.min(samples - c * CHUNK);
            let mut acc = DMatrix::zeros(dim, dim);
            for _ in 0..count {
                let x = rng::uniform_point(&mut r, dim);
                let g = grad(&x);
                for i in 0..dim {
                    for j in 0..=i {
                        acc[(i, j)] += g[i] * g[j];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = pairwise_sum(&partials) / samples as f64;
    for i in 0..dim {
        for j in 0..i {
            total[(j, i)] = total[(i, j)];
        }
    }
    SpectralMatrix::new(total)
}

/// Monte-Carlo active subspace of a GP's posterior mean.
pub fn mc_active_subspace(model: &GpModel, samples: usize, seed: u64) -> Result<SpectralMatrix> {
    if samples < 100 {
        return invalid(format!("need at least 100 Monte-Carlo samples, got {samples}"));
    }
    mc_gradient_outer(model.dim(), samples, seed, |x| model.mean_gradient(x))
}

/// Active subspace of the piecewise-linear interpolant of `f` on `n_grid`
/// evenly spaced points of `[0, 1]`: the mean squared segment slope.
pub fn pwl_active_subspace_1d(f: impl Fn(f64) -> f64, n_grid: usize) -> Result<f64> {
    if n_grid < 2 {
        return invalid(format!("grid needs at least 2 points, got {n_grid}"));
    }
    let segs = (n_grid - 1) as f64;
    let values: Vec<f64> = (0..n_grid).map(|i| f(i as f64 / segs)).collect();
    let sum: f64 = values.windows(2).map(|w| ((w[1] - w[0]) * segs).powi(2)).sum();
    Ok(sum / segs)
}

/// Normalized diagonal of a sensitivity matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Importance {
    pub values: Vec<f64>,
    /// Set when the diagonal is numerically zero; `values` are then all zero.
    pub degenerate: bool,
}

/// `diag(C)/‖diag(C)‖₂`.
pub fn importance(c: &SpectralMatrix) -> Importance {
    let d = c.diagonal();
    let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n < DEGENERATE_NORM {
        return Importance {
            values: vec![0.0; d.len()],
            degenerate: true,
        };
    }
    Importance {
        values: d.iter().map(|v| v / n).collect(),
        degenerate: false,
    }
}

/// `1 − |cos|` between the leading eigenvector of `c` and `u`.
pub fn subspace_error(c: &SpectralMatrix, u: &[f64]) -> Result<f64> {
    if !(c.leading_eigenvalue() > 0.0) {
        return Err(Error::Degenerate("leading eigenvalue is not positive".into()));
    }
    Ok(1.0 - subspace_cosine(&c.leading_vector(), u)?)
}

/// Index `k` (1-based) maximizing `ln λ_k − ln λ_{k+1}`, with eigenvalues
/// floored at `1e-12·λ_1`. Ties go to the smaller `k`.
pub fn select_dim(eigenvalues: &[f64]) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return invalid("dimension selection needs at least two eigenvalues");
    }
    let top = eigenvalues[0];
    if !(top > 0.0) {
        return Err(Error::Degenerate("leading eigenvalue is not positive".into()));
    }
    let floor = 1e-12 * top;
    let logs: Vec<f64> = eigenvalues.iter().map(|l| l.max(floor).ln()).collect();
    let mut best = (1, logs[0] - logs[1]);
    for k in 2..eigenvalues.len() {
        let gap = logs[k - 1] - logs[k];
        if gap > best.1 {
            best = (k, gap);
        }
    }
    Ok(best.0)
}

/// Eigen-summary of an active-subspace estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceReport {
    pub matrix: SpectralMatrix,
    pub importances: Vec<f64>,
    pub degenerate: bool,
    pub selected_dim: usize,
    pub leading_vectors: Vec<Vec<f64>>,
}

impl SubspaceReport {
    pub fn new(matrix: SpectralMatrix) -> Self {
        let imp = importance(&matrix);
        let eig: Vec<f64> = matrix.eigenvalues().iter().copied().collect();
        let degenerate = imp.degenerate || !(eig[0] > 0.0);
        let selected_dim = if degenerate || eig.len() < 2 { 1 } else { select_dim(&eig).unwrap_or(1) };
        let leading_vectors = columns_of(matrix.eigenvectors()).into_iter().take(selected_dim).collect();
        Self {
            matrix,
            importances: imp.values,
            degenerate,
            selected_dim,
            leading_vectors,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.eigenvalues().iter().copied().collect()
    }
}

impl Serialize for SubspaceReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            eigenvalues: Vec<f64>,
            eigenvectors: Vec<Vec<f64>>,
            importances: &'a [f64],
            selected_dim: usize,
            degenerate: bool,
        }
        Repr {
            eigenvalues: self.eigenvalues(),
            eigenvectors: columns_of(self.matrix.eigenvectors()),
            importances: &self.importances,
            selected_dim: self.selected_dim,
            degenerate: self.degenerate,
        }
        .serialize(s)
    }
}
