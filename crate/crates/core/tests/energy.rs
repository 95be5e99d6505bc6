mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use affine_sobolev::energy::*;
use affine_sobolev::field::*;
use affine_sobolev::linalg::Mat;
use affine_sobolev::solvers::bubble::radial_bubble_quotient;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gm(rows: &[Vec<f64>]) -> GramMatrix {
    GramMatrix::new(Mat::from_rows(rows)).unwrap()
}

#[test]
fn gram_of_zero_and_one_variable_fields() {
    let g = GridSpec::cube(2, 33, 0.0, 1.0).unwrap();
    let z = gram_matrix(&ScalarField::zeros(g.clone()));
    assert_eq!(z.matrix().max_abs(), 0.0);
    let u = ScalarField::from_fn(g, |x| (PI * x[0]).sin()).unwrap();
    let a = gram_matrix(&u);
    assert!(a.matrix()[(0, 0)] > 0.0);
    assert_eq!(a.matrix()[(0, 1)], 0.0);
    assert_eq!(a.matrix()[(1, 1)], 0.0);
    assert_eq!(a.det(), 0.0);
    assert!(a.is_degenerate());
    let j = affine_sobolev_j2(&a).unwrap();
    assert!(j.degenerate && j.value == 0.0);
}

#[test]
fn gaussian_gram_and_j2() {
    let u = radial_gaussian(&centred_grid(2, 6.0, 1.0 / 64.0));
    let a = gram_matrix(&u);
    assert!(frob_rel(a.matrix(), &Mat::identity(2).scale(PI / 2.0)) < 1e-4);
    let j = affine_sobolev_j2(&a).unwrap();
    assert!((j.value - 0.5).abs() < 1e-3);
    assert!(!j.degenerate);
}

#[test]
fn energy_of_simple_matrices() {
    assert!((affine_energy(&gm(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap() - 2.0).abs() < 1e-15);
    assert!((affine_energy(&gm(&[vec![4.0, 0.0], vec![0.0, 1.0]])).unwrap() - 4.0).abs() < 1e-15);
    let i3 = GramMatrix::new(Mat::identity(3)).unwrap();
    assert!((affine_energy(&i3).unwrap() - 3.0).abs() < 1e-15);
}

#[test]
fn radial_fields_have_isotropic_gram() {
    for n in [2, 3] {
        let u = if n == 2 {
            ScalarField::from_fn(centred_grid(2, 1.25, 1.0 / 64.0), |x| bump(x, &[0.0; 2], 1.0)).unwrap()
        } else {
            radial_gaussian(&centred_grid(3, 4.5, 1.0 / 16.0))
        };
        let a = gram_matrix(&u);
        let grad = a.trace();
        assert!(rel(affine_energy(&a).unwrap(), grad) < 1e-6, "N = {n}");
        let expected = omega_n(n).powf(-1.0 / n as f64) * (grad / n as f64).sqrt();
        assert!(rel(affine_sobolev_j2(&a).unwrap().value, expected) < 1e-6);
        // the sphere integrand is constant up to the pointwise/edge Gram difference
        let s = j2_by_sphere_integral(&u, min_directions(n)).unwrap();
        assert!(rel(s, expected) < 1e-3, "N = {n}: {s} vs {expected}");
    }
}

#[test]
fn sphere_route_matches_closed_form_for_anisotropic_gaussian() {
    let m = Mat::from_diag(&[4.0, 0.25]);
    let u = gaussian(&centred_grid(2, 12.0, 1.0 / 32.0), &m);
    let closed = affine_sobolev_j2(&gram_matrix(&u)).unwrap().value;
    let sphere = j2_by_sphere_integral(&u, 400).unwrap();
    assert!(rel(sphere, closed) < 1e-3, "{sphere} vs {closed}");
}

#[test]
fn sphere_route_rejects_zero_and_few_directions() {
    let g = GridSpec::cube(2, 17, -1.0, 1.0).unwrap();
    assert!(matches!(
        j2_by_sphere_integral(&ScalarField::zeros(g.clone()), 64),
        Err(affine_sobolev::Error::DegenerateGram { .. })
    ));
    let u = radial_gaussian(&g);
    assert!(j2_by_sphere_integral(&u, 10).is_err());
}

#[test]
fn normalizing_transform_closed_forms() {
    let t = normalizing_transform(&gm(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
    assert_eq!(*t.composed.matrix(), Mat::identity(2));
    let a = gm(&[vec![4.0, 0.0], vec![0.0, 1.0]]);
    let t = normalizing_transform(&a).unwrap().composed;
    let m = t.matrix();
    assert!((m.det() - 1.0).abs() < 1e-14);
    let tat = &(&m.transpose() * a.matrix()) * m;
    assert!(frob_rel(&tat, &Mat::identity(2).scale(2.0)) < 1e-14);
    // diag(1/√2, √2) up to axis signs
    assert!((m[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    assert!((m[(1, 1)].abs() - 2f64.sqrt()).abs() < 1e-14);
    assert!(m[(0, 1)].abs() < 1e-14 && m[(1, 0)].abs() < 1e-14);
}

#[test]
fn sampled_minimum_of_radial_field_is_at_identity() {
    let u = ScalarField::from_fn(centred_grid(2, 1.25, 1.0 / 64.0), |x| bump(x, &[0.0, 0.0], 1.0)).unwrap();
    let r = energy_via_sampled_min(&u, 24, 3, &SampledMinOptions::default()).unwrap();
    for s in &r.samples {
        assert!(*s >= r.affine_energy * (1.0 - 1e-3), "{s} < {}", r.affine_energy);
    }
    assert!(rel(r.at_normalizer, r.affine_energy) < 1e-9);
}

#[test]
fn sheared_gaussian_recovers_unsheared_energy() {
    let g = centred_grid(2, 6.0, 1.0 / 64.0);
    let u0 = radial_gaussian(&g);
    let e0 = affine_energy(&gram_matrix(&u0)).unwrap();
    let s = Mat::from_rows(&[vec![1.0, 0.8], vec![0.0, 1.0]]);
    let u = gaussian(&g, &(&s.transpose() * &s));
    let r = energy_via_sampled_min(&u, 16, 11, &SampledMinOptions::default()).unwrap();
    assert!(rel(r.at_normalizer, e0) < 0.02);
    assert!(r.at_normalizer <= r.sampled_min);
}

#[test]
fn sobolev_ratio_invariances() {
    let g = centred_grid(3, 4.5, 1.0 / 10.0);
    let m = Mat::from_rows(&[vec![4.0, 0.6, 0.0], vec![0.6, 2.0, 0.2], vec![0.0, 0.2, 1.4]]);
    let u = gaussian(&g, &m);
    let r0 = sobolev_ratio(&u).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_unimodular(3, 3.0, &mut rng);
    let (lo, hi) = u.support_box(1e-10);
    let target = GridSpec::fitted(&lo, &hi, &t, &[0.0; 3], 1.0 / 10.0, 1 << 23).unwrap();
    let v = resample(&u, &AffineMap::linear(t), &target).unwrap();
    let r1 = sobolev_ratio(&v).unwrap();
    assert!(rel(r1, r0) < 5e-3, "{r1} vs {r0}");
    let dil = AffineMap::linear(Mat::identity(3).scale(1.5));
    let w = resample(&u, &dil, &g).unwrap();
    let r2 = sobolev_ratio(&w).unwrap();
    assert!(rel(r2, r0) < 5e-3, "{r2} vs {r0}");
}

#[test]
fn bubble_has_the_largest_sobolev_ratio() {
    // for radial u, ratio = ω^{1/N} √N · ‖u‖_{2*}/‖∇u‖₂, maximal at the bubble
    let n = 3;
    let c = omega_n(n).powf(1.0 / 3.0) * 3f64.sqrt();
    let bubble = c / radial_bubble_quotient(n, 400.0, 400_000).sqrt();
    let sharp = c / sobolev_constant_3d().sqrt();
    assert!(bubble < sharp && rel(bubble, sharp) < 0.01);
    let g = centred_grid(3, 4.0, 1.0 / 10.0);
    let fields = [
        radial_gaussian(&g),
        gaussian(&g, &Mat::from_diag(&[3.0, 1.0, 1.0])),
        ScalarField::from_fn(g.clone(), |x| bump(x, &[0.0; 3], 2.0)).unwrap(),
        ScalarField::from_fn(g.clone(), |x| bump(x, &[0.5, 0.0, 0.0], 1.5) + bump(x, &[-1.5, 0.5, 0.0], 1.0)).unwrap(),
    ];
    for f in &fields {
        let r = sobolev_ratio(f).unwrap();
        assert!(r < sharp, "{r} ≥ {sharp}");
    }
}

fn sobolev_constant_3d() -> f64 {
    affine_sobolev::solvers::bubble::sobolev_constant(3)
}

#[test]
fn friedrichs_ratio_is_bounded_on_the_disk() {
    // ‖u‖₂² ≤ E₂/λ₁(disk) by Faber–Krahn over affine images; E₂ = N ω^{2/N} J²
    let g = GridSpec::cube(2, 65, -1.0, 1.0).unwrap();
    let mask = Arc::new(DomainMask::from_region(g, &Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap());
    let lambda1 = 2.404825557695773f64.powi(2);
    let bound = (2.0 * omega_n(2) / lambda1).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    use rand::Rng;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
        let r = rng.random_range(0.3..0.6);
        let s = Mat::from_rows(&[vec![1.0, rng.random_range(-1.0..1.0)], vec![0.0, 1.0]]);
        let u = ScalarField::from_fn_masked(mask.clone(), |x| {
            let y = s.mul_vec(&[x[0] - c[0], x[1] - c[1]]);
            bump(&y, &[0.0, 0.0], r)
        })
        .unwrap();
        let j = affine_sobolev_j2(&gram_matrix(&u)).unwrap();
        assert!(!j.degenerate);
        worst = worst.max(lp_norm(&u, 2.0).unwrap() / j.value);
    }
    assert!(worst < bound, "{worst} vs {bound}");
}

#[test]
fn poincare_fails_for_one_variable_fields() {
    let g = GridSpec::cube(2, 65, 0.0, 1.0).unwrap();
    let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
    let j = affine_sobolev_j2(&gram_matrix(&u)).unwrap().value;
    let mean = integrate(&u);
    assert!(j * j + mean * mean <= 1e-10);
    assert!(lp_norm(&u, 2.0).unwrap() > 0.1);
}

#[test]
fn energy_report_row_matches_fields() {
    let u = radial_gaussian(&centred_grid(2, 6.0, 1.0 / 32.0));
    let r = energy_report(&u).unwrap();
    assert!((r.e2 - PI).abs() < 1e-3);
    let row = r.csv_row("g");
    assert_eq!(row.split(',').count(), ENERGY_CSV_HEADER.split(',').count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalizer_of_random_spd(n in 2usize..=4, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let b = Mat::from_row_major(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = (&b.transpose() * &b).add(&Mat::identity(n).scale(0.1));
        let a = GramMatrix::new(a.symmetrized()).unwrap();
        let t = normalizing_transform(&a).unwrap().composed;
        let m = t.matrix();
        prop_assert!((m.det() - 1.0).abs() <= 1e-12);
        let tat = &(&m.transpose() * a.matrix()) * m;
        let target = Mat::identity(n).scale(a.det().powf(1.0 / n as f64));
        prop_assert!(tat.sub(&target).frobenius() / a.matrix().frobenius() <= 1e-10);
    }

    #[test]
    fn am_gm_and_energy_bound(vals in proptest::collection::vec(-1.0..1.0f64, 64)) {
        let g = GridSpec::cube(2, 8, 0.0, 1.0).unwrap();
        let u = ScalarField::new(g, vals).unwrap();
        let a = gram_matrix(&u);
        let n = 2.0;
        prop_assert!(a.det().max(0.0).powf(1.0 / n) <= a.trace() / n * (1.0 + 1e-12) + 1e-300);
        prop_assert!(affine_energy(&a).unwrap() <= a.trace() * (1.0 + 1e-12));
    }

    #[test]
    fn sphere_route_agrees_on_anisotropic_gaussians(a in 0.3..3.0f64, b in 0.3..3.0f64, c in -0.25..0.25f64) {
        let m = Mat::from_rows(&[vec![a, c * (a * b).sqrt()], vec![c * (a * b).sqrt(), b]]);
        let u = gaussian(&centred_grid(2, 10.0, 1.0 / 32.0), &m);
        let closed = affine_sobolev_j2(&gram_matrix(&u)).unwrap().value;
        let sphere = j2_by_sphere_integral(&u, 200).unwrap();
        prop_assert!(rel(sphere, closed) < 1e-3, "{} vs {}", sphere, closed);
    }
}
