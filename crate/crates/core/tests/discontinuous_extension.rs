use jumpsas_core::discas::{
    a_p_constant, b_r_matrix, beta_r_exact, beta_r_mc, extended_asm, null_direction_check, boundary_integral_oracle,
    BlackBox, BrSettings, Density, InnerSolver, Measure, OuterScheme,
};
use jumpsas_core::testfn::{random_unit_vector, RidgeKind};
use jumpsas_core::{subspace_cosine, PiecewiseSmooth, TestFunction};

fn stratified(seed: u64) -> BrSettings {
    BrSettings::exact(
        OuterScheme::BandStratified {
            bulk: 3000,
            per_band: 2000,
        },
        seed,
    )
}

#[test]
fn step_ridge_leading_direction_is_the_normal() {
    let u = random_unit_vector(3, 1).unwrap();
    let f = TestFunction::ridge(RidgeKind::F4, &u).unwrap();
    let b = b_r_matrix(&f, 1e-2, &stratified(2)).unwrap();
    assert!(subspace_cosine(&b.leading_vector(), &u).unwrap() > 0.9999);
}

#[test]
fn scaled_estimate_approaches_boundary_integral() {
    let u = [0.8, 0.6];
    let f = TestFunction::ridge(RidgeKind::F3, &u).unwrap();
    let est = extended_asm(&f, &[4e-2, 2e-2, 1e-2, 5e-3], &stratified(3)).unwrap();
    let rhs = boundary_integral_oracle(2, f.jumps(), Density::Uniform).unwrap();
    let errs: Vec<f64> = est
        .matrices
        .iter()
        .map(|m| m.frobenius_distance(&rhs) / rhs.entries().norm())
        .collect();
    assert!(errs[3] < 0.05, "{errs:?}");
    assert!(errs[3] <= errs[0], "{errs:?}");
    assert_eq!(est.a_p, a_p_constant(2).unwrap());
}

#[test]
fn black_box_and_known_structure_agree_in_expectation() {
    let f = TestFunction::mixed_2d();
    let x = [0.52, 0.3];
    let r = 0.05;
    let exact = beta_r_exact(&f, &x, r).unwrap();
    let mc = beta_r_mc(&|y: &[f64]| f.eval(y), &x, r, 40_000, 4).unwrap();
    for k in 0..2 {
        let z = (mc.beta[k] - exact[k]).abs() / mc.std_err()[k];
        assert!(z < 4.0, "component {k}: z = {z}");
    }
}

#[test]
fn ridge_null_direction_has_no_slope() {
    let u = [0.6, 0.8];
    let f = TestFunction::ridge(RidgeKind::F3, &u).unwrap();
    let probes = vec![vec![0.3, 0.5], vec![0.5, 0.45], vec![0.7, 0.2]];
    let chk = null_direction_check(&|y: &[f64]| f.eval(y), &[0.8, -0.6], &probes, 0.05, 4000, 5).unwrap();
    assert!(chk.max_se_ratio < 3.5, "{chk:?}");
}

#[test]
fn monte_carlo_inner_solver_matches_exact_on_average() {
    let f = TestFunction::mixed_2d();
    let exact_settings = BrSettings::exact(OuterScheme::Uniform { samples: 2000 }, 6);
    let mc_settings = BrSettings {
        inner: InnerSolver::MonteCarlo { samples: 2000 },
        ..exact_settings
    };
    let exact = b_r_matrix(&f, 0.05, &exact_settings).unwrap();
    let mc = b_r_matrix(&f, 0.05, &mc_settings).unwrap();
    let rel = mc.frobenius_distance(&exact) / exact.entries().norm();
    assert!(rel < 0.15, "{rel}");
}

#[test]
fn black_box_linear_slope_is_recovered() {
    let bb = BlackBox::new(2, |x: &[f64]| x[0]);
    let s = BrSettings {
        measure: Measure::Interior { margin: 0.1 },
        ..BrSettings::monte_carlo(2, 7)
    };
    let m = b_r_matrix(&bb, 0.05, &s).unwrap();
    assert!((m.entries()[(0, 0)] - 1.0).abs() < 1e-8);
    assert!(m.entries()[(1, 1)].abs() < 1e-8);
}
