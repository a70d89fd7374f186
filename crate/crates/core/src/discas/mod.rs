//! Finite-radius regression slopes `β_r`, their outer-product matrices `B^r`
//! and the scaled estimate `A_P·r·B^r` of the extended active subspace.
//!
//! `β_r(x)` is the least-squares slope of `f(x + z)` on `z` with `z` uniform
//! in the ball of radius `r`. It is linear in `f`, so for functions built
//! from affine jumps plus a smooth remainder it can be evaluated exactly:
//! each jump contributes a closed-form half-space profile along its normal,
//! and the remainder is handled by a symmetric ball cubature.

pub mod checks;
pub mod geometry;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::asm::pairwise_sum;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, orthogonal_complement, SpectralMatrix};
use crate::quad::{gauss_legendre, integrate, integrate_with_breaks};
use crate::rng::{self, Rng};
use crate::testfn::{AffineJump, PiecewiseSmooth};

pub use geometry::{boundary_integral_oracle, Density};

pub const MIN_RADIUS: f64 = 1e-4;
pub const DEFAULT_OUTER_SAMPLES: usize = 5000;
const CHUNK: usize = 256;
const MAX_REJECTIONS: usize = 1_000_000;

pub fn default_inner_samples(dim: usize) -> usize {
    (200 * dim).max(2000)
}

/// i.i.d. uniform draws from the `dim`-ball of radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallSample {
    pub radius: f64,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

fn ball_point(rng: &mut Rng, dim: usize, r: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng::standard_normal(rng)).collect();
        let n = norm(&g);
        if n > 0.0 {
            let rho = r * rng::uniform(rng).powf(1.0 / dim as f64);
            return g.into_iter().map(|v| v * rho / n).collect();
        }
    }
}

pub fn ball_sample(dim: usize, r: f64, m: usize, seed: u64) -> Result<BallSample> {
    if dim == 0 || !(r > 0.0) || !r.is_finite() || m == 0 {
        return invalid(format!("ball sample needs P ≥ 1, r > 0, M ≥ 1 (got {dim}, {r}, {m})"));
    }
    let mut g = rng::rng(seed);
    let points = (0..m).map(|_| ball_point(&mut g, dim, r)).collect();
    Ok(BallSample {
        radius: r,
        dim,
        points,
        seed,
    })
}

/// `ξ_P` with `∫_{‖z‖≤r} z_i² dz = ξ_P r^{P+2}`.
pub fn xi_p(dim: usize) -> f64 {
    let p = dim as f64;
    std::f64::consts::PI.powf(p / 2.0) / (2.0 * libm::tgamma((p + 4.0) / 2.0))
}

/// A Monte-Carlo slope with its sandwich covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub beta: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl BetaEstimate {
    pub fn std_err(&self) -> Vec<f64> {
        (0..self.beta.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }

    /// Standard error of `wᵀβ`.
    pub fn std_err_along(&self, w: &[f64]) -> f64 {
        let p = w.len();
        let mut v = 0.0;
        for i in 0..p {
            for j in 0..p {
                v += w[i] * self.covariance[(i, j)] * w[j];
            }
        }
        v.max(0.0).sqrt()
    }
}

/// Through-origin least squares of `f(x + z)` on `z` over a ball sample.
///
/// Draws come in antithetic pairs `±z`, so a constant `f` gives exactly zero
/// and a linear `f` is recovered exactly. The covariance treats each pair as
/// one cluster.
pub fn beta_r_mc<F>(f: &F, x: &[f64], r: f64, m: usize, seed: u64) -> Result<BetaEstimate>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let p = x.len();
    if p == 0 || !(r > 0.0) || !r.is_finite() {
        return invalid(format!("need a nonempty point and r > 0, got P = {p}, r = {r}"));
    }
    if m < 10 * p {
        return invalid(format!("need at least {} inner samples, got {m}", 10 * p));
    }
    let pairs = m.div_ceil(2);
    let mut g = rng::rng(seed);
    let mut zs = Vec::with_capacity(pairs);
    let mut ds = Vec::with_capacity(pairs);
    let mut s = DMatrix::<f64>::zeros(p, p);
    let mut rhs = nalgebra::DVector::<f64>::zeros(p);
    let mut xp = vec![0.0; p];
    let mut xm = vec![0.0; p];
    for _ in 0..pairs {
        let z = ball_point(&mut g, p, r);
        for i in 0..p {
            xp[i] = x[i] + z[i];
            xm[i] = x[i] - z[i];
        }
        let d = f(&xp) - f(&xm);
        for i in 0..p {
            rhs[i] += z[i] * d;
            for j in 0..p {
                s[(i, j)] += 2.0 * z[i] * z[j];
            }
        }
        zs.push(z);
        ds.push(d);
    }
    let chol = s.cholesky().ok_or(Error::RankDeficient)?;
    let beta = chol.solve(&rhs);
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for (z, d) in zs.iter().zip(&ds) {
        let fitted: f64 = 2.0 * z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
        let e = d - fitted;
        for i in 0..p {
            for j in 0..p {
                meat[(i, j)] += z[i] * z[j] * e * e;
            }
        }
    }
    let inv = chol.inverse();
    let covariance = &inv * meat * &inv;
    Ok(BetaEstimate {
        beta: beta.iter().copied().collect(),
        covariance,
    })
}

/// Slope profile of a half-space indicator along its normal.
///
/// With `q_P` the 1D marginal density of the unit ball, the normal component
/// of `β_r` for `c·1[s ≤ t]` is `c (P+2)/r · g_P(t/r)`, where
/// `g_P(σ) = ∫_{−1}^{σ} s q_P(s) ds = −k_P (1−σ²)^{(P+1)/2} / (P+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceProfile {
    dim: usize,
    norm_const: f64,
}

impl HalfspaceProfile {
    pub fn new(dim: usize) -> Self {
        let a = (dim as f64 - 1.0) / 2.0;
        let mass = integrate(|s: f64| (1.0 - s * s).max(0.0).powf(a), -1.0, 1.0, 0.0, 1e-14);
        Self {
            dim,
            norm_const: 1.0 / mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalizing constant `k_P` of `q_P`.
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn g(&self, sigma: f64) -> f64 {
        if !(sigma > -1.0 && sigma < 1.0) {
            return 0.0;
        }
        let e = (self.dim as f64 + 1.0) / 2.0;
        -self.norm_const * (1.0 - sigma * sigma).powf(e) / (self.dim as f64 + 1.0)
    }

    /// Normal component of `β_r` at signed distance `t` inside the set.
    pub fn beta_normal(&self, t: f64, r: f64, c: f64) -> f64 {
        c * (self.dim as f64 + 2.0) / r * self.g(t / r)
    }
}

/// Normal component of `β_r` for `c·1[s ≤ t]`, by adaptive quadrature of
/// `∫_{−r}^{min(t,r)} s p_P(s) ds` with `p_P` the radius-`r` ball marginal.
pub fn halfspace_beta_oracle(t: f64, r: f64, dim: usize, c: f64) -> Result<f64> {
    if !(r > 0.0) || dim == 0 {
        return invalid(format!("need r > 0 and P ≥ 1, got r = {r}, P = {dim}"));
    }
    let a = (dim as f64 - 1.0) / 2.0;
    let shape = |s: f64| (1.0 - (s / r).powi(2)).max(0.0).powf(a);
    let mass = integrate(shape, -r, r, 0.0, 1e-13);
    let upper = t.min(r);
    if upper <= -r {
        return Ok(0.0);
    }
    let m = integrate(|s| s * shape(s) / mass, -r, upper, 1e-300, 1e-12);
    Ok(c * (dim as f64 + 2.0) / (r * r) * m)
}

/// `A_P = 1 / [(P+2)² ∫_{−1}^{1} g_P(σ)² dσ]` by nested adaptive quadrature.
pub fn a_p_constant(dim: usize) -> Result<f64> {
    if dim == 0 {
        return invalid("P must be at least 1");
    }
    let a = (dim as f64 - 1.0) / 2.0;
    let shape = move |s: f64| (1.0 - s * s).max(0.0).powf(a);
    let k = 1.0 / integrate(shape, -1.0, 1.0, 0.0, 1e-15);
    let g = |sigma: f64| integrate(|s| k * s * shape(s), -1.0, sigma, 1e-16, 1e-13);
    let i = integrate(|sigma| g(sigma).powi(2), -1.0, 1.0, 1e-16, 1e-13);
    let p2 = dim as f64 + 2.0;
    Ok(1.0 / (p2 * p2 * i))
}

/// Symmetric cubature for `E[z h(z)]` over the unit ball, `P ≤ 3`.
#[derive(Debug, Clone, PartialEq)]
struct BallCubature {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl BallCubature {
    fn new(dim: usize) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                let (x, w) = gauss_legendre(20);
                for (xi, wi) in x.iter().zip(&w) {
                    nodes.push(vec![*xi]);
                    weights.push(0.5 * wi);
                }
            }
            2 => {
                let (x, w) = gauss_legendre(12);
                let n_theta = 32;
                for (xi, wi) in x.iter().zip(&w) {
                    let rho = 0.5 * (xi + 1.0);
                    let wr = 0.5 * wi * 2.0 * rho;
                    for k in 0..n_theta {
                        let th = std::f64::consts::TAU * k as f64 / n_theta as f64;
                        nodes.push(vec![rho * th.cos(), rho * th.sin()]);
                        weights.push(wr / n_theta as f64);
                    }
                }
            }
            3 => {
                let (x, w) = gauss_legendre(12);
                let n_phi = 32;
                for (xi, wi) in x.iter().zip(&w) {
                    let rho = 0.5 * (xi + 1.0);
                    let wr = 0.5 * wi * 3.0 * rho * rho;
                    for (mu, wm) in x.iter().zip(&w) {
                        let sin = (1.0 - mu * mu).sqrt();
                        for k in 0..n_phi {
                            let ph = std::f64::consts::TAU * k as f64 / n_phi as f64;
                            nodes.push(vec![rho * sin * ph.cos(), rho * sin * ph.sin(), rho * mu]);
                            weights.push(wr * 0.5 * wm / n_phi as f64);
                        }
                    }
                }
            }
            p => {
                return Err(Error::UnsupportedGeometry(format!(
                    "exact slopes of a smooth remainder are implemented for P ≤ 3, got P = {p}"
                )))
            }
        }
        Ok(Self { nodes, weights })
    }
}

/// Exact `β_r` for [`PiecewiseSmooth`] functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolver {
    profile: HalfspaceProfile,
    cubature: Option<BallCubature>,
}

impl ExactSolver {
    pub fn new<F: PiecewiseSmooth + ?Sized>(f: &F) -> Result<Self> {
        let dim = f.dim();
        Ok(Self {
            profile: HalfspaceProfile::new(dim),
            cubature: if f.has_smooth_part() { Some(BallCubature::new(dim)?) } else { None },
        })
    }

    pub fn beta<F: PiecewiseSmooth + ?Sized>(&self, f: &F, x: &[f64], r: f64) -> Vec<f64> {
        let p = x.len();
        let mut beta = vec![0.0; p];
        for j in f.jumps() {
            let b = self.profile.beta_normal(-j.level(x), r, j.size());
            if b != 0.0 {
                for (bi, ni) in beta.iter_mut().zip(j.normal()) {
                    *bi += b * ni;
                }
            }
        }
        if let Some(cub) = &self.cubature {
            let g0 = f.smooth_part(x);
            let scale = (p as f64 + 2.0) / r;
            let mut y = vec![0.0; p];
            for (node, w) in cub.nodes.iter().zip(&cub.weights) {
                for i in 0..p {
                    y[i] = x[i] + r * node[i];
                }
                let h = w * (f.smooth_part(&y) - g0);
                for i in 0..p {
                    beta[i] += scale * h * node[i];
                }
            }
        }
        beta
    }
}

/// Exact `β_r(x)` for a function with affine jumps and (for `P ≤ 3`) a smooth
/// remainder.
pub fn beta_r_exact<F: PiecewiseSmooth + ?Sized>(f: &F, x: &[f64], r: f64) -> Result<Vec<f64>> {
    if x.len() != f.dim() || !(r > 0.0) {
        return invalid("point dimension must match f and r must be positive");
    }
    Ok(ExactSolver::new(f)?.beta(f, x, r))
}

/// A total function known only through evaluations. The exact solver treats
/// it as smooth.
pub struct BlackBox<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> BlackBox<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> PiecewiseSmooth for BlackBox<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn jumps(&self) -> &[AffineJump] {
        &[]
    }

    fn smooth_part(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn has_smooth_part(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSolver {
    MonteCarlo { samples: usize },
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterScheme {
    /// Plain uniform draws from μ.
    Uniform { samples: usize },
    /// Uniform draws away from every jump band plus `per_band` uniform draws
    /// inside each band `{|h_j| < r}`, weighted by exact band volumes.
    BandStratified { bulk: usize, per_band: usize },
    /// Adaptive Gauss-Kronrod over μ with breaks at `τ_j ± r`; `P = 1` only.
    Quadrature1d,
}

/// Uniform measure on a box `[lo, hi]^P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    UnitCube,
    /// `[margin, 1 − margin]^P`.
    Interior { margin: f64 },
}

impl Measure {
    pub fn bounds(&self) -> Result<(f64, f64)> {
        match *self {
            Measure::UnitCube => Ok((0.0, 1.0)),
            Measure::Interior { margin } if (0.0..0.5).contains(&margin) => Ok((margin, 1.0 - margin)),
            Measure::Interior { margin } => invalid(format!("margin must lie in [0, 0.5), got {margin}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrSettings {
    pub inner: InnerSolver,
    pub outer: OuterScheme,
    pub measure: Measure,
    pub seed: u64,
}

impl BrSettings {
    /// Monte-Carlo inner and outer loops at their default sizes.
    pub fn monte_carlo(dim: usize, seed: u64) -> Self {
        Self {
            inner: InnerSolver::MonteCarlo {
                samples: default_inner_samples(dim),
            },
            outer: OuterScheme::Uniform {
                samples: DEFAULT_OUTER_SAMPLES,
            },
            measure: Measure::UnitCube,
            seed,
        }
    }

    pub fn exact(outer: OuterScheme, seed: u64) -> Self {
        Self {
            inner: InnerSolver::Exact,
            outer,
            measure: Measure::UnitCube,
            seed,
        }
    }
}

enum Inner {
    Mc(usize),
    Exact(ExactSolver),
}

impl Inner {
    fn beta<F: PiecewiseSmooth + ?Sized>(&self, f: &F, x: &[f64], r: f64, seed: u64) -> Result<Vec<f64>> {
        match self {
            Inner::Mc(m) => Ok(beta_r_mc(&|y: &[f64]| f.eval(y), x, r, *m, seed)?.beta),
            Inner::Exact(s) => Ok(s.beta(f, x, r)),
        }
    }
}

/// `(1/count) Σ w_i β_i β_iᵀ` over `count` draws, chunked by derived seeds
/// and reduced pairwise in chunk order.
fn outer_mean<S, T>(dim: usize, count: usize, seed: u64, draw: S, term: T) -> Result<DMatrix<f64>>
where
    S: Fn(&mut Rng) -> Result<Vec<f64>> + Sync,
    T: Fn(&[f64], u64) -> Result<Option<(f64, Vec<f64>)>> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<DMatrix<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = rng::rng(rng::derive_seed(seed, c as u64));
            let n = CHUNK.min(count - c * CHUNK);
            let mut acc = DMatrix::zeros(dim, dim);
            for _ in 0..n {
                let x = draw(&mut g)?;
                let inner_seed = g.next_u64();
                if let Some((w, b)) = term(&x, inner_seed)? {
                    for i in 0..dim {
                        for j in 0..dim {
                            acc[(i, j)] += w * b[i] * b[j];
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&partials) / count as f64)
}

fn box_point(g: &mut Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| lo + (hi - lo) * rng::uniform(g)).collect()
}

fn in_band(j: &AffineJump, x: &[f64], r: f64) -> bool {
    j.level(x).abs() < r
}

/// Uniform sampler for `{x ∈ [lo,hi]^P : |h(x)| < r}` in the frame of the
/// jump's normal.
struct BandSampler {
    normal: Vec<f64>,
    tangents: DMatrix<f64>,
    extents: Vec<f64>,
    center: Vec<f64>,
    center_level: f64,
    lo: f64,
    hi: f64,
}

impl BandSampler {
    fn new(j: &AffineJump, lo: f64, hi: f64) -> Result<Self> {
        let p = j.dim();
        let tangents = if p > 1 { orthogonal_complement(j.normal())? } else { DMatrix::zeros(1, 0) };
        let half = 0.5 * (hi - lo);
        let extents = (0..tangents.ncols())
            .map(|k| half * tangents.column(k).iter().map(|v| v.abs()).sum::<f64>())
            .collect();
        let center = vec![lo + half; p];
        Ok(Self {
            normal: j.normal().to_vec(),
            center_level: j.level(&center),
            tangents,
            extents,
            center,
            lo,
            hi,
        })
    }

    fn draw(&self, g: &mut Rng, r: f64) -> Result<Vec<f64>> {
        let p = self.normal.len();
        for _ in 0..MAX_REJECTIONS {
            let s = r * (2.0 * rng::uniform(g) - 1.0);
            let along = s - self.center_level;
            let mut x: Vec<f64> = (0..p).map(|i| self.center[i] + along * self.normal[i]).collect();
            for (k, e) in self.extents.iter().enumerate() {
                let tau = e * (2.0 * rng::uniform(g) - 1.0);
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += tau * self.tangents[(i, k)];
                }
            }
            if x.iter().all(|v| *v >= self.lo && *v <= self.hi) {
                return Ok(x);
            }
        }
        Err(Error::Degenerate("band sampler rejected every draw".into()))
    }
}

/// `B^r = E_μ[β_r β_rᵀ]`.
pub fn b_r_matrix<F: PiecewiseSmooth + ?Sized>(f: &F, r: f64, settings: &BrSettings) -> Result<SpectralMatrix> {
    let p = f.dim();
    if p == 0 || !(r > 0.0) || !r.is_finite() {
        return invalid(format!("need P ≥ 1 and r > 0, got P = {p}, r = {r}"));
    }
    let (lo, hi) = settings.measure.bounds()?;
    let inner = match settings.inner {
        InnerSolver::MonteCarlo { samples } => {
            if samples < 10 * p {
                return invalid(format!("need at least {} inner samples, got {samples}", 10 * p));
            }
            Inner::Mc(samples)
        }
        InnerSolver::Exact => Inner::Exact(ExactSolver::new(f)?),
    };
    let seed = settings.seed;
    let m = match settings.outer {
        OuterScheme::Uniform { samples } => {
            if samples < 1000 {
                return invalid(format!("need at least 1000 outer samples, got {samples}"));
            }
            outer_mean(
                p,
                samples,
                seed,
                |g| Ok(box_point(g, p, lo, hi)),
                |x, s| Ok(Some((1.0, inner.beta(f, x, r, s)?))),
            )?
        }
        OuterScheme::BandStratified { bulk, per_band } => {
            if bulk < 1000 || per_band < 100 {
                return invalid(format!("need bulk ≥ 1000 and per_band ≥ 100, got {bulk} and {per_band}"));
            }
            let jumps = f.jumps();
            let smooth = f.has_smooth_part();
            let mut total = outer_mean(
                p,
                bulk,
                rng::derive_seed(seed, 0),
                |g| Ok(box_point(g, p, lo, hi)),
                |x, s| {
                    if !smooth || jumps.iter().any(|j| in_band(j, x, r)) {
                        return Ok(None);
                    }
                    Ok(Some((1.0, inner.beta(f, x, r, s)?)))
                },
            )?;
            let box_volume = (hi - lo).powi(p as i32);
            for (k, j) in jumps.iter().enumerate() {
                let vol = geometry::slab_volume(j.normal(), j.offset(), r, lo, hi);
                if vol <= 1e-14 * box_volume {
                    continue;
                }
                let sampler = BandSampler::new(j, lo, hi)?;
                let band = outer_mean(
                    p,
                    per_band,
                    rng::derive_seed(seed, 1 + k as u64),
                    |g| sampler.draw(g, r),
                    |x, s| {
                        let hits = jumps.iter().filter(|jj| in_band(jj, x, r)).count().max(1);
                        Ok(Some((1.0 / hits as f64, inner.beta(f, x, r, s)?)))
                    },
                )?;
                total += band * (vol / box_volume);
            }
            total
        }
        OuterScheme::Quadrature1d => {
            let Inner::Exact(solver) = &inner else {
                return invalid("1D quadrature outer loop requires the exact inner solver");
            };
            if p != 1 {
                return invalid(format!("1D quadrature outer loop requires P = 1, got {p}"));
            }
            let mut breaks = vec![lo, hi];
            for j in f.jumps() {
                let tau = -j.offset() / j.normal()[0];
                breaks.extend([tau - r, tau, tau + r].iter().filter(|t| **t > lo && **t < hi));
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let v = integrate_with_breaks(|x| solver.beta(f, &[x], r)[0].powi(2), &breaks, 1e-300, 1e-12);
            DMatrix::from_element(1, 1, v / (hi - lo))
        }
    };
    SpectralMatrix::new(m)
}

/// Per-radius scaled matrices `A_P·r·B^r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedAsmEstimate {
    pub radii: Vec<f64>,
    pub matrices: Vec<SpectralMatrix>,
    pub a_p: f64,
    pub settings: BrSettings,
}

impl ExtendedAsmEstimate {
    /// The estimate at the smallest radius.
    pub fn finest(&self) -> &SpectralMatrix {
        self.matrices.last().expect("at least one radius")
    }
}

pub fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return invalid("radius schedule is empty");
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("radii must be strictly decreasing");
    }
    let last = radii[radii.len() - 1];
    if !(last >= MIN_RADIUS) || !radii[0].is_finite() {
        return invalid(format!("radii must be finite and at least {MIN_RADIUS}, smallest is {last}"));
    }
    Ok(())
}

pub fn extended_asm<F: PiecewiseSmooth + ?Sized>(
    f: &F,
    radii: &[f64],
    settings: &BrSettings,
) -> Result<ExtendedAsmEstimate> {
    validate_radii(radii)?;
    let a_p = a_p_constant(f.dim())?;
    let matrices = radii
        .iter()
        .map(|&r| b_r_matrix(f, r, settings)?.scaled(a_p * r))
        .collect::<Result<_>>()?;
    Ok(ExtendedAsmEstimate {
        radii: radii.to_vec(),
        matrices,
        a_p,
        settings: *settings,
    })
}

/// Largest `|wᵀβ_r|` over the probes and the largest ratio of that to its
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullCheck {
    pub max_abs: f64,
    pub max_se_ratio: f64,
}

pub fn null_direction_check<F>(f: &F, w: &[f64], probes: &[Vec<f64>], r: f64, m: usize, seed: u64) -> Result<NullCheck>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let nw = norm(w);
    if nw == 0.0 {
        return invalid("null direction must be nonzero");
    }
    let w: Vec<f64> = w.iter().map(|v| v / nw).collect();
    let mut out = NullCheck {
        max_abs: 0.0,
        max_se_ratio: 0.0,
    };
    for (i, x) in probes.iter().enumerate() {
        let est = beta_r_mc(f, x, r, m, rng::derive_seed(seed, i as u64))?;
        let proj = dot(&w, &est.beta).abs();
        let se = est.std_err_along(&w);
        let ratio = if proj == 0.0 { 0.0 } else if se == 0.0 { f64::INFINITY } else { proj / se };
        out.max_abs = out.max_abs.max(proj);
        out.max_se_ratio = out.max_se_ratio.max(ratio);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{RidgeKind, TestFunction};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_sample_moments() {
        for (p, r) in [(1usize, 1.0), (3, 0.5)] {
            let s = ball_sample(p, r, 20_000, 4).unwrap();
            assert!(s.points.iter().all(|z| norm(z) <= r));
            let want = r * r / (p as f64 + 2.0);
            for i in 0..p {
                let sq: Vec<f64> = s.points.iter().map(|z| z[i] * z[i]).collect();
                let mean = sq.iter().sum::<f64>() / sq.len() as f64;
                let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sq.len() as f64;
                let se = (var / sq.len() as f64).sqrt();
                assert!((mean - want).abs() <= 3.0 * se, "P={p} i={i}: {mean} vs {want}");
            }
        }
        assert!(ball_sample(2, 0.0, 10, 1).is_err());
    }

    #[test]
    fn xi_matches_ball_moment() {
        // vol(B_1) / (P + 2) in P = 1, 2, 3.
        assert_abs_diff_eq!(xi_p(1), 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(xi_p(2), PI / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(xi_p(3), 4.0 * PI / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn mc_slope_of_constant_and_linear() {
        let c = beta_r_mc(&|_: &[f64]| 3.0, &[0.2, 0.4], 0.1, 200, 1).unwrap();
        assert!(c.beta.iter().all(|b| *b == 0.0));
        let a = [1.5, -2.0, 0.25];
        let l = beta_r_mc(&|x: &[f64]| dot(&a, x), &[0.3, 0.3, 0.3], 0.05, 300, 2).unwrap();
        for (b, want) in l.beta.iter().zip(&a) {
            assert_abs_diff_eq!(b, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn mc_slope_of_heaviside_at_jump() {
        let f = |x: &[f64]| if x[0] <= 0.5 { 1.0 } else { 0.0 };
        let e = beta_r_mc(&f, &[0.5], 0.1, 20_000, 3).unwrap();
        let se = e.std_err()[0];
        assert!((e.beta[0] + 7.5).abs() <= 3.0 * se, "{} ± {se}", e.beta[0]);
        assert!(se < 0.2);
    }

    #[test]
    fn mc_slope_rejects_bad_input() {
        let f = |_: &[f64]| 1.0;
        assert!(beta_r_mc(&f, &[0.5, 0.5], 0.1, 19, 0).is_err());
        assert!(beta_r_mc(&f, &[0.5], -0.1, 100, 0).is_err());
    }

    #[test]
    fn halfspace_oracle_examples() {
        for r in [0.1, 0.01, 1.0] {
            assert_abs_diff_eq!(halfspace_beta_oracle(0.0, r, 1, 1.0).unwrap(), -0.75 / r, epsilon = 1e-10 / r);
            assert_eq!(halfspace_beta_oracle(-r, r, 1, 1.0).unwrap(), 0.0);
            assert_abs_diff_eq!(halfspace_beta_oracle(1.5 * r, r, 2, 1.0).unwrap(), 0.0, epsilon = 1e-10 / r);
        }
        // Closed form in 1D: 3c((τ−x)² − r²)/(4r³).
        let (r, c) = (0.1, 2.0);
        for t in [-0.09, -0.03, 0.0, 0.05, 0.08] {
            let want = 3.0 * c * (t * t - r * r) / (4.0 * r * r * r);
            assert_abs_diff_eq!(halfspace_beta_oracle(t, r, 1, c).unwrap(), want, epsilon = 1e-10 * want.abs());
        }
    }

    #[test]
    fn profile_matches_oracle() {
        for p in 1..=5 {
            let prof = HalfspaceProfile::new(p);
            for t in [-0.95, -0.5, -0.1, 0.0, 0.3, 0.77, 0.999] {
                let r = 0.02;
                let a = prof.beta_normal(t * r, r, 1.0);
                let b = halfspace_beta_oracle(t * r, r, p, 1.0).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn a_p_closed_forms() {
        assert_abs_diff_eq!(a_p_constant(1).unwrap(), 5.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(a_p_constant(2).unwrap(), 315.0 * PI * PI / 2048.0, epsilon = 1e-8);
        assert_abs_diff_eq!(a_p_constant(3).unwrap(), 1.4, epsilon = 1e-8);
    }

    #[test]
    fn a_p_matches_profile_closed_form() {
        // ∫ g_P² from the closed-form profile, integrated independently.
        for p in 1..=6 {
            let prof = HalfspaceProfile::new(p);
            let i = integrate(|s| prof.g(s).powi(2), -1.0, 1.0, 0.0, 1e-13);
            let p2 = p as f64 + 2.0;
            assert_abs_diff_eq!(a_p_constant(p).unwrap(), 1.0 / (p2 * p2 * i), epsilon = 1e-8);
        }
    }

    #[test]
    fn exact_slope_of_heaviside_matches_closed_form() {
        let f = TestFunction::heaviside(0.5, 1.0);
        let r = 0.1;
        for x in [0.42, 0.5, 0.55, 0.61, 0.2] {
            let t: f64 = 0.5 - x;
            let want = if t.abs() < r { 3.0 * (t * t - r * r) / (4.0 * r.powi(3)) } else { 0.0 };
            assert_abs_diff_eq!(beta_r_exact(&f, &[x], r).unwrap()[0], want, epsilon = 1e-10);
        }
    }

    #[test]
    fn exact_slope_agrees_with_mc() {
        let u = [0.3f64.cos(), 0.3f64.sin()];
        let f = TestFunction::ridge(RidgeKind::F3, &u).unwrap();
        let x = [0.5, 0.5];
        let exact = beta_r_exact(&f, &x, 0.05).unwrap();
        let mc = beta_r_mc(&|y: &[f64]| f.eval(y), &x, 0.05, 40_000, 7).unwrap();
        let se = mc.std_err();
        for i in 0..2 {
            assert!((exact[i] - mc.beta[i]).abs() <= 3.0 * se[i], "{exact:?} vs {:?} ± {se:?}", mc.beta);
        }
    }

    #[test]
    fn exact_slope_of_smooth_functions_is_gradient() {
        let q = TestFunction::centered_quadratic(2);
        let x = [0.2, 0.7];
        let b = beta_r_exact(&q, &x, 0.05).unwrap();
        assert_abs_diff_eq!(b[0], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 0.4, epsilon = 1e-12);
        let q3 = TestFunction::centered_quadratic(3);
        let b3 = beta_r_exact(&q3, &[0.1, 0.5, 0.9], 0.2).unwrap();
        for (b, w) in b3.iter().zip([-0.8, 0.0, 0.8]) {
            assert_abs_diff_eq!(*b, w, epsilon = 1e-12);
        }
        let l = TestFunction::linear(&[2.0, -1.0]);
        let bl = beta_r_exact(&l, &[0.4, 0.4], 0.1).unwrap();
        assert_abs_diff_eq!(bl[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bl[1], -1.0, epsilon = 1e-12);
        assert!(matches!(
            beta_r_exact(&TestFunction::centered_quadratic(4), &[0.5; 4], 0.1),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn b_r_of_constant_is_zero() {
        let f = TestFunction::constant(2, 4.0);
        let s = BrSettings {
            inner: InnerSolver::MonteCarlo { samples: 40 },
            outer: OuterScheme::Uniform { samples: 1000 },
            measure: Measure::UnitCube,
            seed: 3,
        };
        let m = b_r_matrix(&f, 0.05, &s).unwrap();
        assert_eq!(m.entries().norm(), 0.0);
        let e = extended_asm(&f, &[0.1, 0.05], &s).unwrap();
        assert!(e.matrices.iter().all(|m| m.entries().norm() == 0.0));
    }

    #[test]
    fn b_r_of_heaviside_scales_like_inverse_radius() {
        let f = TestFunction::heaviside(0.5, 1.0);
        let r = 0.01;
        let m = b_r_matrix(&f, r, &BrSettings::exact(OuterScheme::Quadrature1d, 0)).unwrap();
        assert_abs_diff_eq!(m.entries()[(0, 0)], 3.0 / (5.0 * r), epsilon = 1e-6);
        let strat = b_r_matrix(&f, r, &BrSettings::exact(OuterScheme::BandStratified { bulk: 1000, per_band: 20_000 }, 1)).unwrap();
        assert_abs_diff_eq!(strat.entries()[(0, 0)] * 5.0 * r / 3.0, 1.0, epsilon = 0.03);
    }

    #[test]
    fn b_r_of_linear_on_interior_is_outer_product() {
        let f = TestFunction::linear(&[1.0, 0.0]);
        let s = BrSettings {
            inner: InnerSolver::MonteCarlo { samples: 100 },
            outer: OuterScheme::Uniform { samples: 1000 },
            measure: Measure::Interior { margin: 0.05 },
            seed: 2,
        };
        let m = b_r_matrix(&f, 0.01, &s).unwrap();
        assert_abs_diff_eq!(m.entries()[(0, 0)], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.entries()[(1, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn flat_jump_converges_to_patch_length() {
        let f = TestFunction::ridge(RidgeKind::F3, &[1.0, 0.0]).unwrap();
        let s = BrSettings::exact(OuterScheme::BandStratified { bulk: 1000, per_band: 8000 }, 5);
        let e = extended_asm(&f, &[0.01], &s).unwrap();
        let m = e.finest().entries();
        assert_abs_diff_eq!(m[(0, 0)], 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(m[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn band_stratified_agrees_with_uniform() {
        let f = TestFunction::mixed_2d();
        let r = 0.1;
        let a = b_r_matrix(&f, r, &BrSettings::exact(OuterScheme::Uniform { samples: 40_000 }, 1)).unwrap();
        let b = b_r_matrix(&f, r, &BrSettings::exact(OuterScheme::BandStratified { bulk: 20_000, per_band: 20_000 }, 2)).unwrap();
        let rel = a.frobenius_distance(&b) / a.entries().norm();
        assert!(rel < 0.03, "{rel}: {a:?} vs {b:?}");
    }

    #[test]
    fn determinism_and_radius_validation() {
        let f = TestFunction::mixed_2d();
        let s = BrSettings::exact(OuterScheme::BandStratified { bulk: 1000, per_band: 500 }, 11);
        assert_eq!(b_r_matrix(&f, 0.02, &s).unwrap(), b_r_matrix(&f, 0.02, &s).unwrap());
        assert!(extended_asm(&f, &[0.01, 0.02], &s).is_err());
        assert!(extended_asm(&f, &[0.01, 5e-5], &s).is_err());
        assert!(extended_asm(&f, &[], &s).is_err());
        let bad = BrSettings::exact(OuterScheme::Uniform { samples: 999 }, 0);
        assert!(b_r_matrix(&f, 0.02, &bad).is_err());
        let q = BrSettings::exact(OuterScheme::Quadrature1d, 0);
        assert!(b_r_matrix(&f, 0.02, &q).is_err());
    }

    #[test]
    fn null_directions() {
        let u = [0.6, 0.8];
        let f3 = TestFunction::ridge(RidgeKind::F3, &u).unwrap();
        let probes: Vec<Vec<f64>> = (0..5).map(|i| vec![0.3 + 0.1 * i as f64, 0.5]).collect();
        let w = [-0.8, 0.6];
        let c = null_direction_check(&|x: &[f64]| f3.eval(x), &w, &probes, 0.1, 2000, 1).unwrap();
        assert!(c.max_se_ratio <= 3.0, "{c:?}");
        let k = null_direction_check(&|_: &[f64]| 1.0, &u, &probes, 0.1, 200, 2).unwrap();
        assert_eq!(k.max_abs, 0.0);
        let x2 = |x: &[f64]| x[1];
        let l = null_direction_check(&x2, &[1.0, 0.0], &probes, 0.1, 200, 3).unwrap();
        assert!(l.max_abs < 1e-12);
        let b = beta_r_mc(&x2, &probes[0], 0.1, 200, 3).unwrap();
        assert_abs_diff_eq!(b.beta[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn serializes_estimate() {
        let f = TestFunction::heaviside(0.5, 1.0);
        let e = extended_asm(&f, &[0.1, 0.05], &BrSettings::exact(OuterScheme::Quadrature1d, 0)).unwrap();
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["radii"].as_array().unwrap().len(), 2);
        assert_eq!(v["settings"]["outer"]["kind"], "quadrature1d");
        assert!((v["a_p"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn b_r_is_symmetric_psd(seed in 0u64..1000, r in 0.01f64..0.2) {
            let f = TestFunction::mixed_2d();
            let s = BrSettings::exact(OuterScheme::Uniform { samples: 1000 }, seed);
            let m = b_r_matrix(&f, r, &s).unwrap();
            let e = m.entries();
            prop_assert!((e - e.transpose()).norm() <= 1e-12 * e.norm());
            prop_assert!(m.eigenvalues().iter().all(|l| *l >= -1e-10 * m.leading_eigenvalue()));
        }

        #[test]
        fn heaviside_scaled_limit_is_jump_squared(c in 0.1f64..3.0, tau in 0.2f64..0.8) {
            let f = TestFunction::heaviside(tau, c);
            let r = 0.01;
            let m = b_r_matrix(&f, r, &BrSettings::exact(OuterScheme::Quadrature1d, 0)).unwrap();
            let scaled = m.entries()[(0, 0)] * 5.0 * r / 3.0;
            prop_assert!((scaled - c * c).abs() <= 1e-8 * c * c);
        }
    }
}
