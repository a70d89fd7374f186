//! Analytic test functions with known ridge directions and jump sets.
//!
//! Every function is total on ℝ^P: ball sampling around points near the cube
//! boundary evaluates outside `[0,1]^P`.
//!
//! Discontinuous functions also carry an exact decomposition
//! `f(x) = Σ_j c_j·1[h_j(x) ≤ 0] + g(x)` with affine `h_j(x) = nⱼᵀx + oⱼ`
//! (unit normal) and continuous `g`. Sizes `c_j` are signed, so any finite
//! sum of half-space indicators can be represented.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm};
use crate::rng;

/// `c` if `x ≤ tau`, else 0. The boundary point belongs to the set.
pub fn heaviside_1d(x: f64, tau: f64, c: f64) -> f64 {
    if x <= tau {
        c
    } else {
        0.0
    }
}

/// `1[x1 ≥ 0.5] + 6(x2 − 0.5)²`: a jump along x1 and a smooth bowl along x2.
pub fn mixed_2d(x: &[f64]) -> f64 {
    let jump = if x[0] >= 0.5 { 1.0 } else { 0.0 };
    jump + 6.0 * (x[1] - 0.5).powi(2)
}

/// Standard normal vector scaled to unit length; uniform on the sphere.
pub fn random_unit_vector(dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let mut r = rng::rng(seed);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng::standard_normal(&mut r)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return Ok(v.into_iter().map(|x| x / n).collect());
        }
    }
}

/// `size · 1[normalᵀx + offset ≤ 0]` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineJump {
    normal: Vec<f64>,
    offset: f64,
    size: f64,
}

impl AffineJump {
    /// `normal` need not be unit length; the level function is rescaled,
    /// which leaves the indicator unchanged.
    pub fn new(normal: Vec<f64>, offset: f64, size: f64) -> Result<Self> {
        let n = norm(&normal);
        if !(n > 0.0) || !n.is_finite() {
            return invalid("jump normal must be a nonzero finite vector");
        }
        Ok(Self {
            normal: normal.iter().map(|v| v / n).collect(),
            offset: offset / n,
            size,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `h(x)`, the signed distance to the boundary (negative inside the set).
    pub fn level(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }

    pub fn indicator(&self, x: &[f64]) -> f64 {
        if self.level(x) <= 0.0 {
            self.size
        } else {
            0.0
        }
    }
}

/// A function with a known decomposition into affine jumps plus a continuous
/// remainder.
pub trait PiecewiseSmooth: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    fn jumps(&self) -> &[AffineJump];

    /// The continuous remainder `g`.
    fn smooth_part(&self, x: &[f64]) -> f64;

    /// False when `g` is constant, in which case it contributes nothing to
    /// any regression slope.
    fn has_smooth_part(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeKind {
    /// `(uᵀx)²`
    F1,
    /// `exp(−(uᵀx)²)`
    F2,
    /// `1[uᵀ(x − ½·1) ≥ 0]`
    F3,
    /// `1[sin(10π/P · uᵀ(x − ½·1)) ≥ 0]`
    F4,
}

impl RidgeKind {
    pub fn name(self) -> &'static str {
        match self {
            RidgeKind::F1 => "f1",
            RidgeKind::F2 => "f2",
            RidgeKind::F3 => "f3",
            RidgeKind::F4 => "f4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f1" => Some(RidgeKind::F1),
            "f2" => Some(RidgeKind::F2),
            "f3" => Some(RidgeKind::F3),
            "f4" => Some(RidgeKind::F4),
            _ => None,
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, RidgeKind::F1 | RidgeKind::F2)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Steps(Vec<(f64, f64)>),
    Mixed2d,
    Ridge { which: RidgeKind, u: Vec<f64>, f4_base: f64 },
    Linear(Vec<f64>),
    Constant(f64),
    CenteredQuadratic,
    SineQuadratic,
}

/// A named analytic test function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    name: String,
    dim: usize,
    kind: Kind,
    smooth: bool,
    ridge_direction: Option<Vec<f64>>,
    jumps: Vec<AffineJump>,
}

impl TestFunction {
    /// `c·1[x ≤ tau]` on the line.
    pub fn heaviside(tau: f64, c: f64) -> Self {
        Self::steps(&[(tau, c)]).named("heaviside")
    }

    /// `Σ c_j·1[x ≤ tau_j]` on the line.
    pub fn steps(steps: &[(f64, f64)]) -> Self {
        let jumps = steps
            .iter()
            .map(|&(tau, c)| AffineJump::new(vec![1.0], -tau, c).expect("unit normal"))
            .collect();
        Self {
            name: "steps".into(),
            dim: 1,
            kind: Kind::Steps(steps.to_vec()),
            smooth: false,
            ridge_direction: None,
            jumps,
        }
    }

    pub fn mixed_2d() -> Self {
        Self {
            name: "mixed2d".into(),
            dim: 2,
            kind: Kind::Mixed2d,
            smooth: false,
            ridge_direction: None,
            jumps: vec![AffineJump::new(vec![-1.0, 0.0], 0.5, 1.0).expect("unit normal")],
        }
    }

    /// One of the four ridge functions along unit direction `u`.
    pub fn ridge(which: RidgeKind, u: &[f64]) -> Result<Self> {
        if u.is_empty() || (norm(u) - 1.0).abs() > 1e-12 {
            return invalid(format!("ridge direction must have unit norm, got {}", norm(u)));
        }
        let p = u.len();
        let half_sum = 0.5 * u.iter().sum::<f64>();
        let mut f4_base = 0.0;
        let jumps = match which {
            RidgeKind::F1 | RidgeKind::F2 => Vec::new(),
            // 1[t ≥ 0] with t = uᵀx − ½Σu, i.e. h = −t.
            RidgeKind::F3 => vec![AffineJump::new(neg(u), half_sum, 1.0)?],
            RidgeKind::F4 => {
                // Zero crossings of the sine at t_k = kP/10. Crossing t_k upward
                // switches the indicator on for even k and off for odd k. The
                // list covers every crossing within distance 1 of the cube.
                let width = p as f64 / 10.0;
                let reach = u.iter().map(|v| v.abs()).sum::<f64>() / 2.0 + 1.0;
                let k_hi = (reach / width).floor() as i64;
                let k_lo = -k_hi;
                f4_base = if k_lo.rem_euclid(2) == 1 { 1.0 } else { 0.0 };
                (k_lo..=k_hi)
                    .map(|k| {
                        let size = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        AffineJump::new(neg(u), half_sum + k as f64 * width, size)
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(Self {
            name: which.name().into(),
            dim: p,
            kind: Kind::Ridge {
                which,
                u: u.to_vec(),
                f4_base,
            },
            smooth: which.is_smooth(),
            ridge_direction: Some(u.to_vec()),
            jumps,
        })
    }

    /// `aᵀx`.
    pub fn linear(a: &[f64]) -> Self {
        Self {
            name: "linear".into(),
            dim: a.len(),
            kind: Kind::Linear(a.to_vec()),
            smooth: true,
            ridge_direction: None,
            jumps: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            name: "constant".into(),
            dim,
            kind: Kind::Constant(c),
            smooth: true,
            ridge_direction: None,
            jumps: Vec::new(),
        }
    }

    /// `Σ_j (x_j − ½)²`.
    pub fn centered_quadratic(dim: usize) -> Self {
        Self {
            name: "quadratic".into(),
            dim,
            kind: Kind::CenteredQuadratic,
            smooth: true,
            ridge_direction: None,
            jumps: Vec::new(),
        }
    }

    /// `sin(2πx1) + x2²` on the plane.
    pub fn sine_quadratic() -> Self {
        Self {
            name: "sinquad".into(),
            dim: 2,
            kind: Kind::SineQuadratic,
            smooth: true,
            ridge_direction: None,
            jumps: Vec::new(),
        }
    }

    /// Looks a function up by its registry name. Ridge functions take their
    /// direction from `u`, or draw one from `seed` when `u` is `None`.
    pub fn by_name(name: &str, dim: usize, u: Option<&[f64]>, seed: u64) -> Result<Self> {
        if let Some(kind) = RidgeKind::parse(name) {
            let u = match u {
                Some(u) => u.to_vec(),
                None => random_unit_vector(dim, seed)?,
            };
            return Self::ridge(kind, &u);
        }
        let f = match name {
            "heaviside" => Self::heaviside(0.5, 1.0),
            "mixed2d" => Self::mixed_2d(),
            "quadratic" => Self::centered_quadratic(dim),
            "sinquad" => Self::sine_quadratic(),
            "constant" => Self::constant(dim, 1.0),
            _ => return invalid(format!("unknown test function `{name}`")),
        };
        if f.dim != dim {
            return invalid(format!("`{name}` is defined for P = {}, not {dim}", f.dim));
        }
        Ok(f)
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn ridge_direction(&self) -> Option<&[f64]> {
        self.ridge_direction.as_deref()
    }

    /// Analytic gradient, for smooth functions only.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Linear(a) => Some(a.clone()),
            Kind::Constant(_) => Some(vec![0.0; self.dim]),
            Kind::CenteredQuadratic => Some(x.iter().map(|v| 2.0 * (v - 0.5)).collect()),
            Kind::SineQuadratic => Some(vec![2.0 * PI * (2.0 * PI * x[0]).cos(), 2.0 * x[1]]),
            Kind::Ridge { which: RidgeKind::F1, u, .. } => {
                let t = dot(u, x);
                Some(u.iter().map(|v| 2.0 * t * v).collect())
            }
            Kind::Ridge { which: RidgeKind::F2, u, .. } => {
                let t = dot(u, x);
                let e = (-t * t).exp();
                Some(u.iter().map(|v| -2.0 * t * e * v).collect())
            }
            _ => None,
        }
    }
}

fn neg(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| -v).collect()
}

fn centered_projection(u: &[f64], x: &[f64]) -> f64 {
    u.iter().zip(x).map(|(a, b)| a * (b - 0.5)).sum()
}

impl PiecewiseSmooth for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Steps(s) => s.iter().map(|&(tau, c)| heaviside_1d(x[0], tau, c)).sum(),
            Kind::Mixed2d => mixed_2d(x),
            Kind::Ridge { which, u, .. } => match which {
                RidgeKind::F1 => dot(u, x).powi(2),
                RidgeKind::F2 => (-dot(u, x).powi(2)).exp(),
                RidgeKind::F3 => {
                    if centered_projection(u, x) >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                RidgeKind::F4 => {
                    let arg = 10.0 * PI / self.dim as f64 * centered_projection(u, x);
                    if arg.sin() >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
            Kind::Linear(a) => dot(a, x),
            Kind::Constant(c) => *c,
            Kind::CenteredQuadratic => x.iter().map(|v| (v - 0.5).powi(2)).sum(),
            Kind::SineQuadratic => (2.0 * PI * x[0]).sin() + x[1] * x[1],
        }
    }

    fn jumps(&self) -> &[AffineJump] {
        &self.jumps
    }

    fn smooth_part(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Steps(_) | Kind::Ridge { which: RidgeKind::F3, .. } => 0.0,
            Kind::Ridge { which: RidgeKind::F4, f4_base, .. } => *f4_base,
            Kind::Mixed2d => 6.0 * (x[1] - 0.5).powi(2),
            _ => self.eval(x),
        }
    }

    fn has_smooth_part(&self) -> bool {
        match &self.kind {
            Kind::Steps(_) | Kind::Constant(_) => false,
            Kind::Ridge { which, .. } => which.is_smooth(),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heaviside_examples() {
        assert_eq!(heaviside_1d(0.4, 0.5, 1.0), 1.0);
        assert_eq!(heaviside_1d(0.6, 0.5, 1.0), 0.0);
        assert_eq!(heaviside_1d(0.5, 0.5, 2.0), 2.0);
    }

    #[test]
    fn mixed_examples() {
        assert_eq!(mixed_2d(&[0.6, 0.5]), 1.0);
        assert_eq!(mixed_2d(&[0.4, 0.5]), 0.0);
        assert_abs_diff_eq!(mixed_2d(&[0.4, 1.0]), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn mixed_sections() {
        // x1 fixed: a quadratic in x2; x2 fixed: a unit step in x1.
        let f = TestFunction::mixed_2d();
        for &x2 in &[0.0, 0.3, 0.9] {
            assert_abs_diff_eq!(f.eval(&[0.7, x2]) - f.eval(&[0.2, x2]), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(f.eval(&[0.2, 0.9]) - f.eval(&[0.2, 0.5]), 6.0 * 0.16, epsilon = 1e-14);
    }

    #[test]
    fn ridge_examples() {
        let u = [1.0, 0.0, 0.0];
        let f1 = TestFunction::ridge(RidgeKind::F1, &u).unwrap();
        assert_eq!(f1.eval(&[2.0, 0.3, -7.0]), 4.0);
        let f3 = TestFunction::ridge(RidgeKind::F3, &u).unwrap();
        assert_eq!(f3.eval(&[0.5, 0.5, 0.5]), 1.0);
        let f2 = TestFunction::ridge(RidgeKind::F2, &u).unwrap();
        assert_eq!(f2.eval(&[0.0, 0.4, 0.4]), 1.0);
        assert!(f1.is_smooth() && f2.is_smooth() && !f3.is_smooth());
        assert!(TestFunction::ridge(RidgeKind::F1, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn unit_vectors() {
        let v = random_unit_vector(1, 5).unwrap();
        assert_eq!(v[0].abs(), 1.0);
        for seed in 0..20 {
            assert_abs_diff_eq!(norm(&random_unit_vector(6, seed).unwrap()), 1.0, epsilon = 1e-12);
        }
        assert!(random_unit_vector(0, 1).is_err());
    }

    #[test]
    fn unit_vector_mean_is_near_zero() {
        let mut mean = [0.0; 3];
        for seed in 0..10_000u64 {
            let v = random_unit_vector(3, seed).unwrap();
            for j in 0..3 {
                mean[j] += v[j] / 10_000.0;
            }
        }
        assert!(norm(&mean) <= 0.05, "{mean:?}");
    }

    #[test]
    fn ridge_invariance_orthogonal_to_u() {
        let mut r = rng::rng(11);
        for (k, which) in [RidgeKind::F1, RidgeKind::F2, RidgeKind::F3, RidgeKind::F4].into_iter().enumerate() {
            let u = random_unit_vector(4, 100 + k as u64).unwrap();
            let f = TestFunction::ridge(which, &u).unwrap();
            for _ in 0..100 {
                let x = rng::uniform_point(&mut r, 4);
                let mut w: Vec<f64> = (0..4).map(|_| rng::standard_normal(&mut r)).collect();
                let c = dot(&w, &u);
                w.iter_mut().zip(&u).for_each(|(a, b)| *a -= c * b);
                let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
                let (fx, fy) = (f.eval(&x), f.eval(&y));
                if which.is_smooth() {
                    assert!((fx - fy).abs() <= 1e-12 * (1.0 + fx.abs()), "{which:?}");
                } else {
                    // Indicators may flip only for points sitting on a boundary
                    // up to rounding in the projection.
                    let t = centered_projection(&u, &x);
                    let near = (0..=40).any(|k| (t.abs() - k as f64 * 0.4).abs() < 1e-12);
                    assert!(fx == fy || near, "{which:?}");
                }
            }
        }
    }

    #[test]
    fn indicator_outputs_are_binary() {
        let u = random_unit_vector(3, 9).unwrap();
        let mut r = rng::rng(2);
        for which in [RidgeKind::F3, RidgeKind::F4] {
            let f = TestFunction::ridge(which, &u).unwrap();
            for _ in 0..500 {
                let v = f.eval(&rng::uniform_point(&mut r, 3));
                assert!(v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn decomposition_matches_eval() {
        let mut r = rng::rng(4);
        let fs = vec![
            TestFunction::ridge(RidgeKind::F3, &random_unit_vector(3, 1).unwrap()).unwrap(),
            TestFunction::ridge(RidgeKind::F4, &random_unit_vector(2, 2).unwrap()).unwrap(),
            TestFunction::ridge(RidgeKind::F4, &random_unit_vector(5, 3).unwrap()).unwrap(),
            TestFunction::mixed_2d(),
            TestFunction::steps(&[(0.3, 1.0), (0.7, 2.0)]),
        ];
        for f in &fs {
            for _ in 0..2000 {
                // points up to 0.5 outside the cube
                let x: Vec<f64> = (0..f.dim()).map(|_| 2.0 * rng::uniform(&mut r) - 0.5).collect();
                let sum: f64 = f.jumps().iter().map(|j| j.indicator(&x)).sum::<f64>() + f.smooth_part(&x);
                assert_abs_diff_eq!(sum, f.eval(&x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(TestFunction::by_name("f3", 5, None, 1).unwrap().dim(), 5);
        assert_eq!(TestFunction::by_name("mixed2d", 2, None, 1).unwrap().name(), "mixed2d");
        assert!(TestFunction::by_name("mixed2d", 3, None, 1).is_err());
        assert!(TestFunction::by_name("nope", 2, None, 1).is_err());
    }
}
