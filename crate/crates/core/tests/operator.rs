mod common;

use std::sync::Arc;

use affine_sobolev::energy::{gram_matrix, GramMatrix};
use affine_sobolev::field::{hessian, resample, AffineMap, AxisBox, Ball, DomainMask, GridSpec, ScalarField};
use affine_sobolev::linalg::Mat;
use affine_sobolev::operator::{
    affine_laplacian, apply_coefficients, comparison_check, constant_coeff_solve, frechet_check,
    stencil_symmetry_defect, ComparisonOptions, DataOrder,
};
use affine_sobolev::Error;
use common::{bump, centred_grid, gaussian, radial_gaussian};
use proptest::prelude::*;
use std::f64::consts::PI;

fn unit_box(n: usize, nodes: usize) -> Arc<DomainMask> {
    let g = GridSpec::cube(n, nodes, 0.0, 1.0).unwrap();
    Arc::new(DomainMask::from_region(g, &AxisBox { lo: vec![0.0; n], hi: vec![1.0; n] }).unwrap())
}

fn ball_mask(n: usize, h: f64) -> Arc<DomainMask> {
    let g = centred_grid(n, 1.0 + 2.0 * h, h);
    Arc::new(DomainMask::from_region(g, &Ball { center: vec![0.0; n], radius: 1.0 }).unwrap())
}

#[test]
fn isotropic_gram_gives_plain_laplacian() {
    for n in [2, 3] {
        let u = radial_gaussian(&centred_grid(n, 4.0, 0.25));
        let l = affine_laplacian(&u).unwrap();
        let hs = hessian(&u).unwrap();
        for (k, v) in l.values().iter().enumerate() {
            let mut plain = 0.0;
            for i in 0..n {
                plain += hs.entry(i, i)[k];
            }
            assert_eq!(*v, plain);
        }
    }
}

#[test]
fn isotropic_gram_on_a_mask_uses_the_identity_stencil() {
    let mask = ball_mask(2, 1.0 / 32.0);
    let u = ScalarField::from_fn_masked(mask, |x| bump(x, &[0.0, 0.0], 1.0)).unwrap();
    let l = affine_laplacian(&u).unwrap();
    let plain = apply_coefficients(&u, &Mat::identity(2)).unwrap();
    assert_eq!(l.values(), plain.values());
}

#[test]
fn linear_fields_have_zero_laplacian() {
    let g = centred_grid(3, 1.0, 0.125);
    let u = ScalarField::from_fn(g, |x| 0.5 + x[0] - 2.0 * x[1] + 3.0 * x[2]).unwrap();
    assert!(affine_laplacian(&u).unwrap().max_abs() < 1e-9);
}

/// Sup error of `Δ_A(u∘S)` against `Δ_A(u)∘S` for an anisotropic Gaussian.
fn equivariance_error(h: f64) -> f64 {
    let m = Mat::from_rows(&[vec![2.0, 0.3], vec![0.3, 0.8]]);
    let s = Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
    let g = centred_grid(2, 7.0, h);
    let u = gaussian(&g, &m);
    // u∘S(x) = exp(−½ xᵀ SᵀMS x)
    let sms = &(&s.transpose() * &m) * &s;
    let us = gaussian(&g, &sms);
    let lhs = affine_laplacian(&us).unwrap();
    let rhs = resample(&affine_laplacian(&u).unwrap(), &AffineMap::linear(s), &g).unwrap();
    let diff = lhs.add_scaled(&rhs, -1.0).unwrap();
    diff.max_abs() / lhs.max_abs()
}

#[test]
fn equivariance_error_decreases_under_refinement() {
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| equivariance_error(h)).collect();
    assert!(errs[2] < 0.02, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < 0.5 * w[0], "{errs:?}");
    }
}

#[test]
fn frechet_zero_direction() {
    let mask = unit_box(2, 17);
    let u = ScalarField::from_fn_masked(mask.clone(), |x| bump(x, &[0.4, 0.5], 0.4)).unwrap();
    let r = frechet_check(&u, &ScalarField::zeros_masked(mask), 1e-5).unwrap();
    assert_eq!((r.fd, r.pairing, r.rel_err), (0.0, 0.0, 0.0));
}

#[test]
fn frechet_matches_pairing_for_bumps() {
    let mask = unit_box(2, 65);
    let cases = [([0.4, 0.5], [0.6, 0.4], 0.3), ([0.3, 0.3], [0.5, 0.6], 0.35), ([0.5, 0.5], [0.45, 0.55], 0.2)];
    for (cu, cv, rv) in cases {
        let u = ScalarField::from_fn_masked(mask.clone(), |x| {
            bump(x, &cu, 0.35) + 0.5 * bump(x, &[cu[0] + 0.2, cu[1]], 0.2)
        })
        .unwrap();
        let v = ScalarField::from_fn_masked(mask.clone(), |x| bump(x, &cv, rv)).unwrap();
        let r = frechet_check(&u, &v, 1e-5).unwrap();
        assert!(r.rel_err <= 1e-5, "{r:?}");
        assert!(r.pairing != 0.0);
    }
}

#[test]
fn frechet_rejects_direction_on_boundary() {
    let mask = unit_box(2, 17);
    let u = ScalarField::from_fn_masked(mask.clone(), |x| bump(x, &[0.5, 0.5], 0.4)).unwrap();
    let v = ScalarField::from_fn(mask.grid().clone(), |_| 1.0).unwrap();
    assert!(matches!(frechet_check(&u, &v, 1e-5), Err(Error::Precondition(_))));
}

#[test]
fn radial_pairing_is_plain_laplacian_pairing() {
    let g = centred_grid(2, 6.0, 1.0 / 32.0);
    let u = radial_gaussian(&g);
    let v = ScalarField::from_fn(g.clone(), |x| bump(x, &[0.3, -0.2], 1.5)).unwrap();
    let r = frechet_check(&u, &v, 1e-5).unwrap();
    // Δ e^{−|x|²/2} = (|x|² − 2) e^{−|x|²/2}
    let lap = ScalarField::from_fn(g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (r2 - 2.0) * (-0.5 * r2).exp()
    })
    .unwrap();
    let exact = lap.inner(&v).unwrap();
    assert!((r.pairing - exact).abs() <= 1e-3 * exact.abs(), "{} vs {exact}", r.pairing);
}

#[test]
fn zero_data_solves_to_zero() {
    let mask = unit_box(3, 9);
    let f = ScalarField::zeros(mask.grid().clone());
    let s = constant_coeff_solve(&GramMatrix::new(Mat::identity(3)).unwrap(), &f, &mask, 1e-10, None).unwrap();
    assert!(s.solution.is_zero());
}

/// Max error of the manufactured solution `sin(πx)sin(πy)` for coefficient `M`.
fn manufactured_error(m: &Mat, nodes: usize) -> f64 {
    let mask = unit_box(2, nodes);
    let mi = m.inverse().unwrap();
    let c = m.det().sqrt();
    let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    // −L u* with L = c Σ (M⁻¹)_ij ∂_i∂_j
    let f = ScalarField::from_fn(mask.grid().clone(), |x| {
        let (s0, s1) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let (c0, c1) = ((PI * x[0]).cos(), (PI * x[1]).cos());
        c * PI * PI * ((mi[(0, 0)] + mi[(1, 1)]) * s0 * s1 - 2.0 * mi[(0, 1)] * c0 * c1)
    })
    .unwrap();
    let gm = GramMatrix::new(m.clone()).unwrap();
    let s = constant_coeff_solve(&gm, &f, &mask, 1e-11, None).unwrap();
    assert!(s.relative_residual <= 1e-10, "{}", s.relative_residual);
    let want = ScalarField::from_fn_masked(mask, exact).unwrap();
    s.solution.add_scaled(&want, -1.0).unwrap().max_abs()
}

#[test]
fn manufactured_solutions_converge_at_second_order() {
    let ms = [
        Mat::identity(2),
        Mat::from_diag(&[2.0, 0.5]),
        Mat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]),
    ];
    for m in &ms {
        let errs: Vec<f64> = [17, 33, 65].iter().map(|&k| manufactured_error(m, k)).collect();
        for (w, h) in errs.windows(2).zip([1.0 / 16.0, 1.0 / 32.0]) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{m:?}: {errs:?}");
            assert!(w[0] <= 2.0 * h * h, "{m:?}: {errs:?}");
        }
    }
}

/// Solves `Δ u = −c` on the ball; `Δ_A u = Δ u` since `u` is radial.
fn radial_solution(mask: &Arc<DomainMask>, c: f64) -> (ScalarField, ScalarField) {
    let f = ScalarField::from_fn(mask.grid().clone(), |_| c).unwrap();
    let s = constant_coeff_solve(&GramMatrix::new(Mat::identity(2)).unwrap(), &f, mask, 1e-12, None).unwrap();
    let data = ScalarField::from_fn_masked(mask.clone(), |_| -c).unwrap();
    (s.solution, data)
}

#[test]
fn comparison_equal_data_gives_equality() {
    let mask = ball_mask(2, 1.0 / 16.0);
    let (u, f) = radial_solution(&mask, 1.0);
    let r = comparison_check(&u, &u, &f, &f, &ComparisonOptions::default()).unwrap();
    assert_eq!(r.data_order, DataOrder::Equal);
    assert!(r.holds && r.violations.is_empty());
}

#[test]
fn comparison_orders_radial_pair_like_classical_solves() {
    let mask = ball_mask(2, 1.0 / 16.0);
    let (u1, f1) = radial_solution(&mask, 1.0);
    let (u2, f2) = radial_solution(&mask, 2.0);
    // Δu₁ = −1 ≥ −2 = Δu₂, so the classical maximum principle gives u₁ ≤ u₂
    assert!(u1.values().iter().zip(u2.values()).all(|(a, b)| a <= b));
    let r = comparison_check(&u1, &u2, &f1, &f2, &ComparisonOptions::default()).unwrap();
    assert_eq!(r.data_order, DataOrder::FirstAbove);
    assert!(r.holds, "{r:?}");
    let mirror = comparison_check(&u2, &u1, &f2, &f1, &ComparisonOptions::default()).unwrap();
    assert_eq!(mirror.data_order, DataOrder::FirstBelow);
    assert!(mirror.holds);
}

#[test]
fn comparison_rejects_non_solutions() {
    let mask = ball_mask(2, 1.0 / 16.0);
    let (u, f) = radial_solution(&mask, 1.0);
    let bent = ScalarField::from_fn_masked(mask, |x| bump(x, &[0.3, 0.0], 0.4)).unwrap();
    let w = u.add_scaled(&bent, 0.01).unwrap();
    let r = comparison_check(&w, &u, &f, &f, &ComparisonOptions::default());
    assert!(matches!(r, Err(Error::Precondition(_))));
}

fn spd(n: usize, raw: &[f64]) -> Mat {
    let b = Mat::from_row_major(n, raw[..n * n].to_vec()).unwrap();
    (&b.transpose() * &b).add(&Mat::identity(n).scale(0.2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stencil_is_symmetric(
        n in 2usize..4,
        raw in proptest::collection::vec(-1.0..1.0f64, 9),
        seed_u in proptest::collection::vec(-1.0..1.0f64, 4),
        seed_v in proptest::collection::vec(-1.0..1.0f64, 4),
    ) {
        let c = spd(n, &raw);
        let mask = ball_mask(n, if n == 2 { 1.0 / 12.0 } else { 1.0 / 6.0 });
        let field = |s: &[f64]| {
            ScalarField::from_fn_masked(mask.clone(), |x| {
                s[0] + s[1] * x[0] + s[2] * x[1] * x[1] + s[3] * (3.0 * x[n - 1]).sin()
            })
            .unwrap()
        };
        let d = stencil_symmetry_defect(&c, &field(&seed_u), &field(&seed_v)).unwrap();
        prop_assert!(d <= 1e-12, "defect {d:e}");
    }
}

#[test]
fn gram_of_radial_solution_is_isotropic() {
    let mask = ball_mask(2, 1.0 / 16.0);
    let (u, _) = radial_solution(&mask, 1.0);
    let a = gram_matrix(&u);
    let m = a.matrix();
    assert!((m[(0, 0)] - m[(1, 1)]).abs() <= 1e-10 * m[(0, 0)]);
    assert!(m[(0, 1)].abs() <= 1e-10 * m[(0, 0)]);
}
