//! Hyperplanes against the unit cube: slab volumes, slice areas and surface
//! integrals over clipped patches.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, SpectralMatrix};
use crate::quad::gauss_legendre;
use crate::testfn::AffineJump;

const DROP: f64 = 1e-12;

/// A weight on the unit cube for boundary integrals.
#[derive(Clone, Copy)]
pub enum Density<'a> {
    Uniform,
    Custom(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl std::fmt::Debug for Density<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Density::Uniform => f.write_str("Uniform"),
            Density::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Reflects negative coefficients into positive ones and drops negligible
/// ones, returning `(a', b')` with `aᵀy ≤ b ⇔ a'ᵀy' ≤ b'` on the cube.
fn canonical(a: &[f64], b: f64) -> (Vec<f64>, f64) {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut shifted = b;
    let mut kept = Vec::with_capacity(a.len());
    for &ai in a {
        if ai < 0.0 {
            shifted -= ai;
        }
        if ai.abs() > DROP * scale {
            kept.push(ai.abs());
        }
    }
    (kept, shifted)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn pos_pow(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        0.0
    } else if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

/// Inclusion-exclusion sum `Σ_v (−1)^{|v|} (b − aᵀv)_+^k / (k! Π a)`.
fn vertex_sum(a: &[f64], b: f64, k: usize) -> f64 {
    let m = a.len();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << m) {
        let mut s = b;
        for (i, ai) in a.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s -= ai;
            }
        }
        let term = pos_pow(s, k);
        total += if mask.count_ones() % 2 == 0 { term } else { -term };
    }
    total / (factorial(k) * a.iter().product::<f64>())
}

/// Volume of `{y ∈ [0,1]^P : aᵀy ≤ b}`.
pub fn halfspace_volume(a: &[f64], b: f64) -> f64 {
    let (a, b) = canonical(a, b);
    if a.is_empty() {
        return if b >= 0.0 { 1.0 } else { 0.0 };
    }
    vertex_sum(&a, b, a.len()).clamp(0.0, 1.0)
}

/// `(P−1)`-dimensional measure of `{y ∈ [0,1]^P : nᵀy + offset = 0}` for a
/// unit normal `n`.
pub fn slice_area(normal: &[f64], offset: f64) -> f64 {
    let (a, b) = canonical(normal, -offset);
    if a.is_empty() {
        return 0.0;
    }
    vertex_sum(&a, b, a.len() - 1).max(0.0)
}

/// Volume of `{x ∈ [lo,hi]^P : |nᵀx + offset| < r}`.
pub fn slab_volume(normal: &[f64], offset: f64, r: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let a: Vec<f64> = normal.iter().map(|v| v * width).collect();
    let b0 = offset + lo * normal.iter().sum::<f64>();
    let v = halfspace_volume(&a, r - b0) - halfspace_volume(&a, -r - b0);
    v.max(0.0) * width.powi(normal.len() as i32)
}

fn segment_integral(normal: &[f64], offset: f64, density: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let x0 = [-offset * normal[0], -offset * normal[1]];
    let d = [-normal[1], normal[0]];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..2 {
        if d[i].abs() < 1e-15 {
            if x0[i] < 0.0 || x0[i] > 1.0 {
                return 0.0;
            }
        } else {
            let (a, b) = ((0.0 - x0[i]) / d[i], (1.0 - x0[i]) / d[i]);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t1 <= t0 {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(20);
    let half = 0.5 * (t1 - t0);
    let mid = 0.5 * (t1 + t0);
    nodes
        .iter()
        .zip(&weights)
        .map(|(s, w)| {
            let t = mid + half * s;
            w * density(&[x0[0] + t * d[0], x0[1] + t * d[1]])
        })
        .sum::<f64>()
        * half
}

/// Vertices of the convex polygon where a plane cuts the unit cube, in
/// angular order within the plane.
fn cube_section(normal: &[f64], offset: f64) -> Result<Vec<[f64; 3]>> {
    let level = |p: &[f64; 3]| normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] + offset;
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for axis in 0..3 {
        for corner in 0..4u32 {
            let mut a = [0.0; 3];
            let mut slot = 0;
            for (j, aj) in a.iter_mut().enumerate() {
                if j != axis {
                    *aj = f64::from(corner >> slot & 1);
                    slot += 1;
                }
            }
            let mut b = a;
            b[axis] = 1.0;
            let (la, lb) = (level(&a), level(&b));
            if (la <= 0.0 && lb >= 0.0) || (la >= 0.0 && lb <= 0.0) {
                let s = if la == lb { 0.0 } else { la / (la - lb) };
                let mut p = a;
                p[axis] = s;
                if !pts.iter().any(|q| (0..3).all(|k| (q[k] - p[k]).abs() < 1e-12)) {
                    pts.push(p);
                }
            }
        }
    }
    if pts.len() < 3 {
        return Ok(Vec::new());
    }
    let basis = orthogonal_complement(normal)?;
    let c = centroid(&pts);
    let angle = |p: &[f64; 3]| {
        let (mut u, mut v) = (0.0, 0.0);
        for k in 0..3 {
            u += basis[(k, 0)] * (p[k] - c[k]);
            v += basis[(k, 1)] * (p[k] - c[k]);
        }
        v.atan2(u)
    };
    pts.sort_by(|p, q| angle(p).total_cmp(&angle(q)));
    Ok(pts)
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            c[k] += p[k] / pts.len() as f64;
        }
    }
    c
}

fn cross_norm(u: [f64; 3], v: [f64; 3]) -> f64 {
    let w = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}

fn polygon_integral(normal: &[f64], offset: f64, density: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
    let pts = cube_section(normal, offset)?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let c = centroid(&pts);
    let (nodes, weights) = gauss_legendre(12);
    let mut total = 0.0;
    for i in 0..pts.len() {
        let (b, d) = (pts[i], pts[(i + 1) % pts.len()]);
        let e1 = [b[0] - c[0], b[1] - c[1], b[2] - c[2]];
        let e2 = [d[0] - b[0], d[1] - b[1], d[2] - b[2]];
        let jac = cross_norm(e1, e2);
        // Collapsed square: x = c + u·e1 + u·v·e2, dA = jac·u du dv.
        for (su, wu) in nodes.iter().zip(&weights) {
            let u = 0.5 * (su + 1.0);
            for (sv, wv) in nodes.iter().zip(&weights) {
                let v = 0.5 * (sv + 1.0);
                let x = [0, 1, 2].map(|k| c[k] + u * e1[k] + u * v * e2[k]);
                total += 0.25 * wu * wv * u * jac * density(&x);
            }
        }
    }
    Ok(total)
}

/// `∫ δ dS` over the part of the jump's zero set inside the unit cube.
pub fn patch_integral(jump: &AffineJump, density: Density<'_>) -> Result<f64> {
    let n = jump.normal();
    let o = jump.offset();
    match density {
        Density::Uniform => Ok(slice_area(n, o)),
        Density::Custom(d) => match n.len() {
            1 => {
                let x = -o / n[0];
                Ok(if (0.0..=1.0).contains(&x) { d(&[x]) } else { 0.0 })
            }
            2 => Ok(segment_integral(n, o, d)),
            3 => polygon_integral(n, o, d),
            p => Err(Error::UnsupportedGeometry(format!(
                "weighted boundary integrals are implemented for P ≤ 3, got P = {p}"
            ))),
        },
    }
}

/// `Σ_j c_j² (∫_{h_j = 0} δ dS) n_j n_jᵀ` over the unit cube.
pub fn boundary_integral_oracle(dim: usize, jumps: &[AffineJump], density: Density<'_>) -> Result<SpectralMatrix> {
    let mut m = DMatrix::zeros(dim, dim);
    for j in jumps {
        if j.dim() != dim {
            return Err(Error::InvalidInput(format!("jump has dimension {}, expected {dim}", j.dim())));
        }
        let w = j.size() * j.size() * patch_integral(j, density)?;
        let n = j.normal();
        for a in 0..dim {
            for b in 0..dim {
                m[(a, b)] += w * n[a] * n[b];
            }
        }
    }
    SpectralMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn axis_aligned_slices() {
        assert_abs_diff_eq!(slice_area(&[1.0, 0.0], -0.5), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(slice_area(&[0.0, 0.0, -1.0], 0.3), 1.0, epsilon = 1e-14);
        assert_eq!(slice_area(&[1.0, 0.0], 0.5), 0.0);
        assert_abs_diff_eq!(slice_area(&[1.0], -0.2), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_slice_of_square() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // x + y = 1 cuts the full diagonal, length √2.
        assert_abs_diff_eq!(slice_area(&[s, s], -s), 2f64.sqrt(), epsilon = 1e-12);
        // x + y = 0.5 cuts a corner, length √2/2.
        assert_abs_diff_eq!(slice_area(&[s, s], -0.5 * s), 0.5 * 2f64.sqrt(), epsilon = 1e-12);
        // x − y = 0 through the opposite corners.
        assert_abs_diff_eq!(slice_area(&[s, -s], 0.0), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cube_mid_section_is_hexagon() {
        // x + y + z = 1.5: regular hexagon with side √2/2, area (3√3/2)(1/2).
        let n = unit(&[1.0, 1.0, 1.0]);
        let o = -1.5 / 3f64.sqrt();
        let want = 1.5 * 3f64.sqrt() * 0.5;
        assert_abs_diff_eq!(slice_area(&n, o), want, epsilon = 1e-12);
        let j = AffineJump::new(n.clone(), o, 1.0).unwrap();
        let one = |_: &[f64]| 1.0;
        assert_abs_diff_eq!(patch_integral(&j, Density::Custom(&one)).unwrap(), want, epsilon = 1e-12);
        assert_eq!(cube_section(&n, o).unwrap().len(), 6);
    }

    #[test]
    fn halfspace_volume_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(halfspace_volume(&[1.0, 1.0], 1.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(halfspace_volume(&[s, s], 0.5 * s), 0.125, epsilon = 1e-14);
        assert_abs_diff_eq!(halfspace_volume(&[1.0, 0.0], 0.3), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(halfspace_volume(&[-1.0, 0.0], -0.3), 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(halfspace_volume(&[1.0, 1.0, 1.0], 3.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(halfspace_volume(&[1.0, 1.0, 1.0], 1.0), 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn slab_in_interior_box() {
        // |x1 − 0.5| < 0.1 in [0.2, 0.8]²: 0.2 × 0.6.
        assert_abs_diff_eq!(slab_volume(&[1.0, 0.0], -0.5, 0.1, 0.2, 0.8), 0.12, epsilon = 1e-13);
        assert_abs_diff_eq!(slab_volume(&[1.0, 0.0], -0.5, 0.1, 0.0, 1.0), 0.2, epsilon = 1e-13);
        // Band hanging over the edge: |x1 − 0.95| < 0.1 ∩ [0,1].
        assert_abs_diff_eq!(slab_volume(&[1.0, 0.0], -0.95, 0.1, 0.0, 1.0), 0.15, epsilon = 1e-13);
    }

    #[test]
    fn oracle_examples() {
        let j = AffineJump::new(vec![-1.0, 0.0], 0.5, 1.0).unwrap();
        let m = boundary_integral_oracle(2, &[j], Density::Uniform).unwrap();
        assert_abs_diff_eq!(m.entries()[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.entries()[(1, 1)], 0.0, epsilon = 1e-14);
        let j2 = AffineJump::new(vec![-1.0, 0.0], 0.5, 2.0).unwrap();
        let m2 = boundary_integral_oracle(2, &[j2], Density::Uniform).unwrap();
        assert_abs_diff_eq!(m2.entries()[(0, 0)], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn weighted_segment_integral() {
        // δ(x) = 2·x2 along x1 = 0.5: ∫_0^1 2t dt = 1.
        let j = AffineJump::new(vec![-1.0, 0.0], 0.5, 1.0).unwrap();
        let d = |x: &[f64]| 2.0 * x[1];
        assert_abs_diff_eq!(patch_integral(&j, Density::Custom(&d)).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn weighted_four_d_is_unsupported() {
        let j = AffineJump::new(vec![1.0, 0.0, 0.0, 0.0], -0.5, 1.0).unwrap();
        let d = |_: &[f64]| 1.0;
        assert!(matches!(patch_integral(&j, Density::Custom(&d)), Err(Error::UnsupportedGeometry(_))));
        assert_abs_diff_eq!(patch_integral(&j, Density::Uniform).unwrap(), 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn clipped_quadrature_matches_slice_formula_2d(theta in 0.0f64..std::f64::consts::TAU, t in -0.7f64..0.7) {
            let n = [theta.cos(), theta.sin()];
            let o = -(n[0] + n[1]) * 0.5 - t;
            let j = AffineJump::new(n.to_vec(), o, 1.0).unwrap();
            let one = |_: &[f64]| 1.0;
            let q = patch_integral(&j, Density::Custom(&one)).unwrap();
            prop_assert!((q - slice_area(&n, o)).abs() < 1e-9);
        }

        #[test]
        fn polygon_quadrature_matches_slice_formula_3d(
            v in prop::array::uniform3(-1.0f64..1.0), t in -0.8f64..0.8,
        ) {
            let n0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(n0 > 0.1);
            let n = unit(&v);
            let o = -n.iter().sum::<f64>() * 0.5 - t;
            let j = AffineJump::new(n.clone(), o, 1.0).unwrap();
            let one = |_: &[f64]| 1.0;
            let q = patch_integral(&j, Density::Custom(&one)).unwrap();
            prop_assert!((q - slice_area(&n, o)).abs() < 1e-8, "{} vs {}", q, slice_area(&n, o));
        }

        #[test]
        fn slab_volume_is_integral_of_slices(theta in 0.0f64..std::f64::consts::TAU, t in -0.5f64..0.5) {
            let n = [theta.cos(), theta.sin()];
            let o = -(n[0] + n[1]) * 0.5 - t;
            let r = 0.05;
            let v = slab_volume(&n, o, r, 0.0, 1.0);
            let mut pts = vec![-r, r];
            for v in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
                let k = o + n[0] * v[0] + n[1] * v[1];
                if k.abs() < r {
                    pts.push(k);
                }
            }
            pts.sort_by(f64::total_cmp);
            let q = crate::quad::integrate_with_breaks(|s| slice_area(&n, o - s), &pts, 1e-13, 1e-11);
            prop_assert!((v - q).abs() < 1e-9);
        }
    }
}
