//! Gaussian-process surrogate with ARD stationary kernels.
//!
//! Hyperparameters are fit by maximizing the log marginal likelihood with a
//! bounded Nelder-Mead search from several seeded random starts. Responses
//! are centered before fitting; the nugget is fixed relative to the response
//! variance and escalated only when the Cholesky factorization fails.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Smallest nugget ever placed on the diagonal.
pub const NUGGET_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Matern52,
    Matern32,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [KernelFamily::Gaussian, KernelFamily::Matern52, KernelFamily::Matern32];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Matern32 => "matern32",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Correlation as a function of the scaled distance `d`.
    fn corr(self, d2: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * d2).exp(),
            KernelFamily::Matern52 => {
                let d = d2.sqrt();
                (1.0 + SQRT5 * d + 5.0 * d2 / 3.0) * (-SQRT5 * d).exp()
            }
            KernelFamily::Matern32 => {
                let d = d2.sqrt();
                (1.0 + SQRT3 * d) * (-SQRT3 * d).exp()
            }
        }
    }

    /// `−(1/d)·∂corr/∂d`, finite at `d = 0` for all three families, so that
    /// `∂k/∂x_j = −σ²·q(d)·(x_j − x'_j)/ℓ_j²`.
    fn grad_factor(self, d2: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * d2).exp(),
            KernelFamily::Matern52 => {
                let d = d2.sqrt();
                5.0 / 3.0 * (1.0 + SQRT5 * d) * (-SQRT5 * d).exp()
            }
            KernelFamily::Matern32 => 3.0 * (-SQRT3 * d2.sqrt()).exp(),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel family with per-dimension lengthscales, signal variance and nugget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    pub nugget: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, variance: f64, nugget: f64) -> Result<Self> {
        let spec = Self {
            family,
            lengthscales,
            variance,
            nugget,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return invalid("lengthscales must be positive and finite");
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return invalid("kernel variance must be positive");
        }
        if !(self.nugget >= NUGGET_FLOOR) {
            return invalid(format!("nugget must be at least {NUGGET_FLOOR:e}"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum()
    }

    /// `k(a, b)` without the nugget.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * self.family.corr(self.scaled_sq_dist(a, b))
    }

    /// Adds `weight·∇ₓk(x, b)` into `out`.
    fn add_grad_x(&self, x: &[f64], b: &[f64], weight: f64, out: &mut [f64]) {
        let q = self.family.grad_factor(self.scaled_sq_dist(x, b));
        let s = -weight * self.variance * q;
        for (((o, xi), bi), l) in out.iter_mut().zip(x).zip(b).zip(&self.lengthscales) {
            *o += s * (xi - bi) / (l * l);
        }
    }
}

/// `k(a, b)` for the given kernel (nugget excluded).
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    spec.eval(a, b)
}

/// Dot product with four independent accumulators.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower Cholesky factor, row-major. `None` if the matrix is not numerically
/// positive definite.
fn cholesky(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            row_i[j] = (row_i[j] - dot4(&row_i[..j], &row_j[..j])) / row_j[j];
        }
        let s = row_i[i] - dot4(&row_i[..i], &row_i[..i]);
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        row_i[i] = s.sqrt();
        for v in &mut row_i[i + 1..] {
            *v = 0.0;
        }
    }
    Some(a)
}

/// Solves `L Lᵀ x = b` in place.
fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s = dot4(row, &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

struct Factorized {
    chol: Vec<f64>,
    alpha: Vec<f64>,
    nugget: f64,
    lml: f64,
}

/// Builds `K + nugget·I`, factorizes it (escalating the nugget ×10 up to
/// `max_nugget` on failure) and solves for the dual weights.
fn factorize(inputs: &[Vec<f64>], centered: &[f64], kernel: &KernelSpec, max_nugget: f64) -> Option<Factorized> {
    let n = inputs.len();
    let scaled: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| x.iter().zip(&kernel.lengthscales).map(|(v, l)| v / l).collect())
        .collect();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        base[i * n + i] = kernel.variance;
        for j in 0..i {
            let d2: f64 = scaled[i].iter().zip(&scaled[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let k = kernel.variance * kernel.family.corr(d2);
            base[i * n + j] = k;
            base[j * n + i] = k;
        }
    }
    let mut nugget = kernel.nugget;
    loop {
        let mut a = base.clone();
        for i in 0..n {
            a[i * n + i] += nugget;
        }
        if let Some(chol) = cholesky(a, n) {
            let mut alpha = centered.to_vec();
            chol_solve(&chol, n, &mut alpha);
            let fit: f64 = centered.iter().zip(&alpha).map(|(y, a)| y * a).sum();
            let logdet: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
            let lml = -0.5 * fit - logdet - 0.5 * n as f64 * LN_2PI;
            return Some(Factorized {
                chol,
                alpha,
                nugget,
                lml,
            });
        }
        nugget *= 10.0;
        if nugget > max_nugget * (1.0 + 1e-12) {
            return None;
        }
    }
}

/// Settings of the likelihood search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub starts: usize,
    /// Nelder-Mead evaluations per free parameter for each random start.
    pub screen_evals_per_param: usize,
    /// Evaluations per free parameter for the final run from the best start.
    pub polish_evals_per_param: usize,
    pub log_lengthscale_bounds: (f64, f64),
    pub log_variance_bounds: (f64, f64),
    /// Nugget as a fraction of the response variance.
    pub relative_nugget: f64,
    /// Largest nugget jitter escalation may reach, as a fraction of the
    /// response variance.
    pub max_relative_nugget: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 10,
            screen_evals_per_param: 15,
            polish_evals_per_param: 60,
            log_lengthscale_bounds: (0.01f64.ln(), 10f64.ln()),
            log_variance_bounds: (1e-4f64.ln(), 1e4f64.ln()),
            relative_nugget: 1e-6,
            max_relative_nugget: 1e-2,
        }
    }
}

/// A fitted surrogate.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    kernel: KernelSpec,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    mean: f64,
    lml: f64,
}

/// JSON summary of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    pub nugget: f64,
    pub log_marginal_likelihood: f64,
}

fn check_design(data: &Dataset) -> Result<()> {
    if data.len() < 3 {
        return invalid(format!("need at least 3 design points, got {}", data.len()));
    }
    let x = data.inputs();
    for i in 0..x.len() {
        for j in 0..i {
            let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() <= 1e-12 {
                return Err(Error::DuplicatePoint(j, i));
            }
        }
    }
    Ok(())
}

fn nugget_for(data: &Dataset, opts: &FitOptions) -> (f64, f64) {
    let var = data.response_variance();
    let nugget = (opts.relative_nugget * var).max(NUGGET_FLOOR);
    (nugget, (opts.max_relative_nugget * var).max(nugget))
}

/// Fits a GP with default [`FitOptions`].
pub fn fit(data: &Dataset, family: KernelFamily, seed: u64) -> Result<GpModel> {
    fit_with(data, family, seed, &FitOptions::default())
}

/// Maximizes the log marginal likelihood over log-lengthscales and
/// log-variance. Deterministic given `seed`.
pub fn fit_with(data: &Dataset, family: KernelFamily, seed: u64, opts: &FitOptions) -> Result<GpModel> {
    check_design(data)?;
    let p = data.dim();
    let mean = data.response_mean();
    let centered: Vec<f64> = data.responses().iter().map(|y| y - mean).collect();
    let (nugget, max_nugget) = nugget_for(data, opts);

    let mut lo = vec![opts.log_lengthscale_bounds.0; p];
    let mut hi = vec![opts.log_lengthscale_bounds.1; p];
    lo.push(opts.log_variance_bounds.0);
    hi.push(opts.log_variance_bounds.1);

    let spec_at = |theta: &[f64]| KernelSpec {
        family,
        lengthscales: theta[..p].iter().map(|v| v.exp()).collect(),
        variance: theta[p].exp(),
        nugget,
    };
    let objective = |theta: &[f64]| -> f64 {
        match factorize(data.inputs(), &centered, &spec_at(theta), max_nugget) {
            Some(f) if f.lml.is_finite() => -f.lml,
            _ => f64::INFINITY,
        }
    };

    let mut r = rng::rng(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.starts.max(1) {
        let start: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng::uniform(&mut r)).collect();
        let found = nelder_mead(&objective, start, &lo, &hi, 0.15, opts.screen_evals_per_param * (p + 1));
        if best.as_ref().is_none_or(|(_, v)| found.1 < *v) {
            best = Some(found);
        }
    }
    let (mut theta, mut value) = best.expect("at least one start");
    if value.is_finite() && opts.polish_evals_per_param > 0 {
        let polished = nelder_mead(&objective, theta.clone(), &lo, &hi, 0.05, opts.polish_evals_per_param * (p + 1));
        if polished.1 < value {
            (theta, value) = polished;
        }
    }
    if !value.is_finite() {
        return Err(Error::IllConditioned(max_nugget));
    }
    GpModel::assemble(data.clone(), spec_at(&theta), max_nugget)
}

/// Bounded Nelder-Mead minimization; trial points are clamped to the box.
/// Returns the best point seen.
fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    start: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    step_frac: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for ((v, a), b) in x.iter_mut().zip(lo).zip(hi) {
            *v = v.clamp(*a, *b);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.clone(), f(&start)));
    for j in 0..d {
        let mut x = start.clone();
        let step = step_frac * (hi[j] - lo[j]);
        x[j] = if x[j] + step <= hi[j] { x[j] + step } else { x[j] - step };
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = d + 1;
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    while evals < max_evals {
        let spread = simplex[d].1 - simplex[0].1;
        if spread.is_finite() && spread <= 1e-7 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut x);
            x
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = f(x);
                    evals += 1;
                }
            }
        }
        order(&mut simplex);
    }
    simplex.swap_remove(0)
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `data`.
    pub fn with_kernel(data: &Dataset, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        if kernel.dim() != data.dim() {
            return invalid(format!("kernel has {} lengthscales for {} inputs", kernel.dim(), data.dim()));
        }
        check_design(data)?;
        let var = data.response_variance();
        let max_nugget = (1e-2 * var).max(kernel.nugget);
        Self::assemble(data.clone(), kernel, max_nugget)
    }

    fn assemble(data: Dataset, mut kernel: KernelSpec, max_nugget: f64) -> Result<Self> {
        let mean = data.response_mean();
        let centered: Vec<f64> = data.responses().iter().map(|y| y - mean).collect();
        let f = factorize(data.inputs(), &centered, &kernel, max_nugget).ok_or(Error::IllConditioned(max_nugget))?;
        kernel.nugget = f.nugget;
        Ok(Self {
            data,
            kernel,
            chol: f.chol,
            alpha: f.alpha,
            mean,
            lml: f.lml,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.alpha
    }

    pub fn response_mean(&self) -> f64 {
        self.mean
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// The lower Cholesky factor of `K + nugget·I`.
    pub fn chol(&self) -> DMatrix<f64> {
        let n = self.data.len();
        DMatrix::from_row_slice(n, n, &self.chol)
    }

    /// `K + nugget·I` at the training inputs.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        let x = self.data.inputs();
        let n = x.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.kernel.eval(&x[i], &x[j]) + if i == j { self.kernel.nugget } else { 0.0 }
        })
    }

    /// Posterior mean `ȳ + Σ α_i k(x, x_i)`.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.mean
            + self
                .data
                .inputs()
                .iter()
                .zip(&self.alpha)
                .map(|(xi, a)| a * self.kernel.eval(x, xi))
                .sum::<f64>()
    }

    /// Analytic gradient of the posterior mean.
    pub fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (xi, a) in self.data.inputs().iter().zip(&self.alpha) {
            self.kernel.add_grad_x(x, xi, *a, &mut g);
        }
        g
    }

    pub fn summary(&self) -> GpSummary {
        GpSummary {
            family: self.kernel.family,
            lengthscales: self.kernel.lengthscales.clone(),
            variance: self.kernel.variance,
            nugget: self.kernel.nugget,
            log_marginal_likelihood: self.lml,
        }
    }
}
