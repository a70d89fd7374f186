//! Sliced inverse regression, KNN regression on projected inputs and
//! cross-validated comparisons of projections.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::asm::{mc_active_subspace, SubspaceReport};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::gp::{fit, KernelFamily};
use crate::linalg::{psd_sqrt, sym_eig, SpectralMatrix};
use crate::rng;

const SIR_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SirResult {
    /// `P×d`, unit-norm columns in the original coordinates.
    #[serde(serialize_with = "crate::linalg::serialize_rows")]
    pub directions: DMatrix<f64>,
    /// Eigenvalues of the weighted slice-mean covariance, descending.
    pub eigenvalues: Vec<f64>,
    pub degenerate: bool,
    /// Set when tied responses left a slice empty and it was merged away.
    pub merged: bool,
}

/// Response slices by rank; tied responses always share a slice.
fn slices(y: &[f64], n_slices: usize) -> (Vec<Vec<usize>>, bool) {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n_slices];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        let slot = (start * n_slices / n).min(n_slices - 1);
        out[slot].extend_from_slice(&order[start..end]);
        start = end;
    }
    let merged = out.iter().any(|s| s.is_empty());
    out.retain(|s| !s.is_empty());
    (out, merged)
}

/// Sliced inverse regression with `n_slices` response slices, returning the
/// top `d` directions.
pub fn sir(data: &Dataset, n_slices: usize, d: usize) -> Result<SirResult> {
    let n = data.len();
    let p = data.dim();
    if n_slices < 2 || n < n_slices {
        return invalid(format!("need n ≥ slices ≥ 2, got n = {n}, slices = {n_slices}"));
    }
    if d == 0 || d > p {
        return invalid(format!("direction count must be in 1..={p}, got {d}"));
    }
    let x = DMatrix::from_fn(n, p, |i, j| data.input(i)[j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64 + DMatrix::identity(p, p) * SIR_RIDGE;
    let (vals, vecs) = sym_eig(&cov)?;
    let inv_sqrt = &vecs * DMatrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt())) * vecs.transpose();
    let z = &centered * &inv_sqrt;

    let (groups, merged) = slices(data.responses(), n_slices);
    if groups.len() < 2 {
        return Ok(SirResult {
            directions: DMatrix::identity(p, d),
            eigenvalues: vec![0.0; p],
            degenerate: true,
            merged,
        });
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for g in &groups {
        let mut mu = DVector::<f64>::zeros(p);
        for &i in g {
            mu += z.row(i).transpose();
        }
        mu /= g.len() as f64;
        m += &mu * mu.transpose() * (g.len() as f64 / n as f64);
    }
    let (evals, evecs) = sym_eig(&m)?;
    let mut directions = &inv_sqrt * evecs.columns(0, d);
    for mut c in directions.column_iter_mut() {
        let nc = c.norm();
        c /= nc;
    }
    Ok(SirResult {
        directions,
        eigenvalues: evals.iter().copied().collect(),
        degenerate: false,
        merged,
    })
}

/// Mean response of the `k` nearest training points; equal distances go to
/// the lower training index.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[f64], queries: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let n = train_x.len();
    if k == 0 || k > n {
        return invalid(format!("k must be in 1..={n}, got {k}"));
    }
    if train_y.len() != n {
        return invalid("training inputs and responses differ in length");
    }
    Ok(queries
        .iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = train_x
                .iter()
                .enumerate()
                .map(|(i, x)| (x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d[..k].iter().map(|&(_, i)| train_y[i]).sum::<f64>() / k as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProjectionKind {
    #[serde(rename = "Ident")]
    Identity,
    #[serde(rename = "ASM")]
    AsmWarp,
    #[serde(rename = "ASMt")]
    AsmWarpTruncated,
    #[serde(rename = "SIR")]
    Sir,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 4] = [
        ProjectionKind::Identity,
        ProjectionKind::AsmWarp,
        ProjectionKind::AsmWarpTruncated,
        ProjectionKind::Sir,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProjectionKind::Identity => "Ident",
            ProjectionKind::AsmWarp => "ASM",
            ProjectionKind::AsmWarpTruncated => "ASMt",
            ProjectionKind::Sir => "SIR",
        }
    }
}

/// A linear map `x ↦ Mᵀx` applied to inputs before KNN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    /// `P×d`.
    #[serde(serialize_with = "crate::linalg::serialize_rows")]
    pub matrix: DMatrix<f64>,
    pub dim: usize,
}

/// What a projection is built from.
#[derive(Debug, Clone, Copy)]
pub enum ProjectionSource<'a> {
    Dim(usize),
    Asm(&'a SpectralMatrix),
    Sir(&'a DMatrix<f64>),
}

impl ProjectionSpec {
    pub fn identity(p: usize) -> Self {
        Self {
            kind: ProjectionKind::Identity,
            matrix: DMatrix::identity(p, p),
            dim: p,
        }
    }

    pub fn asm_warp(c: &SpectralMatrix) -> Result<Self> {
        Ok(Self {
            kind: ProjectionKind::AsmWarp,
            matrix: psd_sqrt(c)?,
            dim: c.dim(),
        })
    }

    /// The warp followed by projection onto the top `d` eigenvectors. With
    /// `d = P` the rotation is omitted, which leaves distances unchanged.
    pub fn asm_warp_truncated(c: &SpectralMatrix, d: usize) -> Result<Self> {
        let p = c.dim();
        if d == 0 || d > p {
            return invalid(format!("truncation dimension must be in 1..={p}, got {d}"));
        }
        let root = psd_sqrt(c)?;
        let matrix = if d == p { root } else { root * c.eigenvectors().columns(0, d) };
        Ok(Self {
            kind: ProjectionKind::AsmWarpTruncated,
            matrix,
            dim: d,
        })
    }

    pub fn sir(directions: &DMatrix<f64>) -> Self {
        Self {
            kind: ProjectionKind::Sir,
            matrix: directions.clone(),
            dim: directions.ncols(),
        }
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                (0..self.dim)
                    .map(|j| row.iter().enumerate().map(|(i, v)| v * self.matrix[(i, j)]).sum())
                    .collect()
            })
            .collect()
    }
}

pub fn make_projection(kind: ProjectionKind, source: ProjectionSource<'_>, d: usize) -> Result<ProjectionSpec> {
    let p = match source {
        ProjectionSource::Dim(p) => p,
        ProjectionSource::Asm(c) => c.dim(),
        ProjectionSource::Sir(m) => m.nrows(),
    };
    if d > p {
        return invalid(format!("dimension {d} exceeds input dimension {p}"));
    }
    match (kind, source) {
        (ProjectionKind::Identity, _) => Ok(ProjectionSpec::identity(p)),
        (ProjectionKind::AsmWarp, ProjectionSource::Asm(c)) => ProjectionSpec::asm_warp(c),
        (ProjectionKind::AsmWarpTruncated, ProjectionSource::Asm(c)) => ProjectionSpec::asm_warp_truncated(c, d),
        (ProjectionKind::Sir, ProjectionSource::Sir(m)) => {
            if d == 0 || d > m.ncols() {
                return invalid(format!("SIR basis has {} columns, asked for {d}", m.ncols()));
            }
            Ok(ProjectionSpec::sir(&m.columns(0, d).into_owned()))
        }
        (k, _) => invalid(format!("{} projection needs a matching source", k.label())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
    #[serde(skip)]
    pub projections: Vec<ProjectionSpec>,
}

/// Seeded assignment of rows to `k_folds` folds.
pub fn fold_assignment(n: usize, k_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let perm = rng::permutation(&mut rng::rng(seed), n);
    let mut folds = vec![Vec::new(); k_folds];
    for (pos, &row) in perm.iter().enumerate() {
        folds[pos % k_folds].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// K-fold cross-validated KNN MSE for several projections learned together
/// on each training split. `builder(train, fold_seed)` returns one
/// projection per method, always in the same order.
pub fn kfold_cv_mse_multi<B>(data: &Dataset, builder: B, k_folds: usize, knn_k: usize, seed: u64) -> Result<Vec<CvResult>>
where
    B: Fn(&Dataset, u64) -> Result<Vec<ProjectionSpec>> + Sync,
{
    let n = data.len();
    if k_folds < 2 || n < k_folds {
        return invalid(format!("need n ≥ folds ≥ 2, got n = {n}, folds = {k_folds}"));
    }
    let folds = fold_assignment(n, k_folds, seed);
    let smallest_train = n - folds.iter().map(Vec::len).max().unwrap_or(0);
    if smallest_train < knn_k {
        return Err(Error::InvalidConfiguration(format!(
            "a training split has {smallest_train} rows, fewer than k = {knn_k}"
        )));
    }
    let per_fold: Vec<Vec<(f64, ProjectionSpec)>> = folds
        .par_iter()
        .enumerate()
        .map(|(fi, test)| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let train = data.subset(&train_idx);
            let held = data.subset(test);
            let specs = builder(&train, rng::derive_seed(seed, fi as u64))?;
            specs
                .into_iter()
                .map(|spec| {
                    let tx = spec.apply(train.inputs());
                    let qx = spec.apply(held.inputs());
                    let pred = knn_predict(&tx, train.responses(), &qx, knn_k)?;
                    let mse = pred.iter().zip(held.responses()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        / held.len() as f64;
                    Ok((mse, spec))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let methods = per_fold.first().map_or(0, Vec::len);
    if per_fold.iter().any(|f| f.len() != methods) {
        return Err(Error::InvalidConfiguration("builder returned a varying number of projections".into()));
    }
    Ok((0..methods)
        .map(|m| {
            let fold_mse: Vec<f64> = per_fold.iter().map(|f| f[m].0).collect();
            CvResult {
                mean_mse: fold_mse.iter().sum::<f64>() / fold_mse.len() as f64,
                fold_mse,
                projections: per_fold.iter().map(|f| f[m].1.clone()).collect(),
            }
        })
        .collect())
}

/// K-fold cross-validated KNN MSE for one projection builder.
pub fn kfold_cv_mse<B>(data: &Dataset, builder: B, k_folds: usize, knn_k: usize, seed: u64) -> Result<CvResult>
where
    B: Fn(&Dataset, u64) -> Result<ProjectionSpec> + Sync,
{
    let mut r = kfold_cv_mse_multi(data, |d, s| Ok(vec![builder(d, s)?]), k_folds, knn_k, seed)?;
    Ok(r.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BakeoffConfig {
    pub kernel: KernelFamily,
    pub mc_samples: usize,
    pub sir_slices: usize,
    pub knn_k: usize,
    pub k_folds: usize,
    /// Take the truncation dimension from the full-data analysis instead of
    /// each training split.
    pub paper_mode: bool,
}

impl Default for BakeoffConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Matern32,
            mc_samples: crate::asm::DEFAULT_MC_SAMPLES,
            sir_slices: 10,
            knn_k: 5,
            k_folds: 10,
            paper_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScore {
    pub method: ProjectionKind,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BakeoffResult {
    pub methods: Vec<MethodScore>,
    /// Dimension from the full-data analysis, when used.
    pub full_data_dim: Option<usize>,
}

impl BakeoffResult {
    pub fn mean(&self, kind: ProjectionKind) -> Option<f64> {
        self.methods.iter().find(|m| m.method == kind).map(|m| m.mean_mse)
    }
}

/// Surrogate active subspace of a dataset: GP fit plus Monte-Carlo gradient
/// outer product.
pub fn surrogate_report(data: &Dataset, kernel: KernelFamily, mc_samples: usize, seed: u64) -> Result<SubspaceReport> {
    let model = fit(data, kernel, rng::derive_seed(seed, 0))?;
    Ok(SubspaceReport::new(mc_active_subspace(&model, mc_samples, rng::derive_seed(seed, 1))?))
}

/// Ident, ASM, ASMt and SIR compared by cross-validated KNN MSE. The
/// surrogate and SIR are refit on every training split.
pub fn bakeoff(data: &Dataset, cfg: &BakeoffConfig, seed: u64) -> Result<BakeoffResult> {
    let p = data.dim();
    let full_data_dim = if cfg.paper_mode {
        Some(surrogate_report(data, cfg.kernel, cfg.mc_samples, rng::derive_seed(seed, 1_000_000))?.selected_dim)
    } else {
        None
    };
    let builder = |train: &Dataset, fold_seed: u64| -> Result<Vec<ProjectionSpec>> {
        let report = surrogate_report(train, cfg.kernel, cfg.mc_samples, fold_seed)?;
        let d = full_data_dim.unwrap_or(report.selected_dim).min(p);
        let slices = cfg.sir_slices.min(train.len());
        let s = sir(train, slices, d)?;
        Ok(vec![
            ProjectionSpec::identity(p),
            ProjectionSpec::asm_warp(&report.matrix)?,
            ProjectionSpec::asm_warp_truncated(&report.matrix, d)?,
            ProjectionSpec::sir(&s.directions),
        ])
    };
    let cv = kfold_cv_mse_multi(data, builder, cfg.k_folds, cfg.knn_k, seed)?;
    Ok(BakeoffResult {
        methods: ProjectionKind::ALL
            .iter()
            .zip(cv)
            .map(|(&method, r)| MethodScore {
                method,
                fold_mse: r.fold_mse,
                mean_mse: r.mean_mse,
            })
            .collect(),
        full_data_dim,
    })
}
