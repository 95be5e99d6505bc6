mod common;

use affine_sobolev::energy::gram_matrix;
use affine_sobolev::field::stencil::lp_norm_pow;
use affine_sobolev::field::{GridSpec, ScalarField};
use affine_sobolev::linalg::Mat;
use affine_sobolev::profiles::{
    brezis_lieb_masses, extract_profiles, normalize_sequence, ProfileOptions, ProfileReport, ScaleClass,
};
use affine_sobolev::Error;
use common::{bump, centred_grid, gaussian, radial_gaussian};

/// Half-maximum radius of `(1 − r²)₊³`.
fn half_max() -> f64 {
    (1.0 - 0.5f64.powf(1.0 / 3.0)).sqrt()
}

fn normalized(f: ScalarField, p: f64) -> ScalarField {
    let m = lp_norm_pow(&f, p).unwrap();
    f.scaled(m.powf(-1.0 / p))
}

/// `x ↦ s^{(N−2)/2} B(s (x − c))` with `B = (1 − |x|²)₊³`.
fn scaled_bump(x: &[f64], c: &[f64], s: f64) -> f64 {
    let n = x.len() as f64;
    s.powf((n - 2.0) / 2.0) * bump(x, c, 1.0 / s)
}

fn opts() -> ProfileOptions {
    ProfileOptions { unit_width: Some(half_max()), ..Default::default() }
}

#[test]
fn empty_and_zero_sequences_have_no_profiles() {
    assert!(normalize_sequence(&[]).unwrap().is_empty());
    let e = extract_profiles(&[], 4.0, &opts()).unwrap();
    assert!(e.items.is_empty());
    let g = centred_grid(2, 2.0, 0.125);
    let zeros = vec![ScalarField::zeros(g); 3];
    let e = extract_profiles(&zeros, 4.0, &opts()).unwrap();
    assert!(e.items.is_empty());
    assert_eq!(e.residual_mass, 0.0);
}

#[test]
fn translating_bump_gives_one_fixed_profile() {
    let h = 1.0 / 32.0;
    let g = GridSpec::covering(&[-2.0, -2.0], &[8.0, 2.0], h).unwrap();
    let fields: Vec<ScalarField> = (1..=5)
        .map(|k| normalized(ScalarField::from_fn(g.clone(), |x| bump(x, &[k as f64, 0.0], 1.0)).unwrap(), 4.0))
        .collect();
    let e = extract_profiles(&fields, 4.0, &opts()).unwrap();
    assert_eq!(e.items.len(), 1);
    let item = &e.items[0];
    assert_eq!(item.scale_class, ScaleClass::Fixed);
    assert_eq!(item.scales, vec![0; 5]);
    for (k, y) in item.shifts.iter().enumerate() {
        assert!((y[0] - (k + 1) as f64).abs() <= h && y[1].abs() <= h, "{y:?}");
    }
    assert!((item.mass - 1.0).abs() < 1e-6);
    assert!(e.residual_mass < 1e-6);
    let masses = brezis_lieb_masses(&e.items, &fields, 4.0).unwrap();
    assert!(masses.deficit.abs() < 1e-6);
    let report = ProfileReport::from(&e);
    assert_eq!(report.items[0].index, 0);
}

#[test]
fn two_bubbles_separate_in_scale() {
    // u_k = B + 2^{k/2} B(2^k x − z) in three dimensions, z = 3e₁
    let h = 1.0 / 40.0;
    let g = GridSpec::covering(&[-1.125; 3], &[2.125, 1.125, 1.125], h).unwrap();
    let fields: Vec<ScalarField> = (1..=3)
        .map(|k| {
            let s = 2f64.powi(k);
            let f = ScalarField::from_fn(g.clone(), |x| {
                scaled_bump(x, &[0.0; 3], 1.0) + scaled_bump(x, &[3.0 / s, 0.0, 0.0], s)
            })
            .unwrap();
            normalized(f, 6.0)
        })
        .collect();
    let e = extract_profiles(&fields, 6.0, &opts()).unwrap();
    assert_eq!(e.items.len(), 2);
    let fixed = e.items.iter().find(|i| i.scale_class == ScaleClass::Fixed).unwrap();
    let shrinking = e.items.iter().find(|i| i.scale_class == ScaleClass::Shrinking).unwrap();
    assert_eq!(fixed.scales, vec![0, 0, 0]);
    assert_eq!(shrinking.scales, vec![1, 2, 3]);
    for (k, y) in shrinking.shifts.iter().enumerate() {
        let want = 3.0 / 2f64.powi(k as i32 + 1);
        assert!((y[0] - want).abs() <= h && y[1].abs() <= h && y[2].abs() <= h, "{y:?}");
    }
    assert!(e.residual_mass < 1e-3 * e.total_mass);
    assert!(e.residual_history.windows(2).all(|w| w[1] < w[0]));
    let m = brezis_lieb_masses(&e.items, &fields, 6.0).unwrap();
    assert!(m.total <= 1.0 + 1e-6);
    assert!(m.gradient_sum <= 1.05 * m.max_energy, "{m:?}");
}

#[test]
fn radial_sequence_normalizes_to_identity() {
    let fields: Vec<ScalarField> = [0.25, 0.125]
        .iter()
        .map(|&h| radial_gaussian(&centred_grid(2, 5.0, h)))
        .collect();
    for e in normalize_sequence(&fields).unwrap() {
        assert_eq!(e.transform.unwrap().matrix(), &Mat::identity(2));
        assert!(!e.degenerate);
    }
}

#[test]
fn growing_shears_normalize_to_the_affine_energy() {
    let g = centred_grid(2, 16.0, 1.0 / 16.0);
    let e2 = std::f64::consts::PI;
    let mut raw = Vec::new();
    let mut fields = Vec::new();
    for k in [0.0, 1.0, 2.0, 3.0] {
        let s = Mat::from_rows(&[vec![1.0, k], vec![0.0, 1.0]]);
        let u = gaussian(&g, &(&s.transpose() * &s));
        raw.push(gram_matrix(&u).trace());
        fields.push(u);
    }
    assert!(raw.windows(2).all(|w| w[1] > w[0]) && raw[3] > 5.0 * raw[0], "{raw:?}");
    for e in normalize_sequence(&fields).unwrap() {
        let v = e.field.unwrap();
        let norm = gram_matrix(&v).trace();
        assert!((norm - e2).abs() <= 0.03 * e2, "{norm}");
    }
}

#[test]
fn degenerate_elements_are_skipped() {
    let g = centred_grid(2, 2.0, 0.125);
    let flat = ScalarField::from_fn(g.clone(), |x| bump(&[x[0]], &[0.0], 1.5)).unwrap();
    let out = normalize_sequence(&[flat, radial_gaussian(&g)]).unwrap();
    assert!(out[0].degenerate && out[0].field.is_none());
    assert!(!out[1].degenerate);
}

#[test]
fn constant_sequence_has_unit_mass() {
    let g = centred_grid(2, 1.5, 1.0 / 32.0);
    let u = normalized(ScalarField::from_fn(g, |x| bump(x, &[0.0, 0.0], 1.0)).unwrap(), 4.0);
    let fields = vec![u; 4];
    let e = extract_profiles(&fields, 4.0, &opts()).unwrap();
    assert_eq!(e.items.len(), 1);
    let m = brezis_lieb_masses(&e.items, &fields, 4.0).unwrap();
    assert!((m.masses[0] - 1.0).abs() < 1e-9 && m.deficit.abs() < 1e-9, "{m:?}");
}

#[test]
fn separated_equal_bumps_split_the_mass() {
    let g = GridSpec::covering(&[-4.0, -1.5], &[4.0, 1.5], 1.0 / 32.0).unwrap();
    let u = normalized(
        ScalarField::from_fn(g, |x| bump(x, &[-2.5, 0.0], 1.0) + bump(x, &[2.5, 0.0], 1.0)).unwrap(),
        4.0,
    );
    let fields = vec![u; 3];
    let e = extract_profiles(&fields, 4.0, &opts()).unwrap();
    assert_eq!(e.items.len(), 2);
    let m = brezis_lieb_masses(&e.items, &fields, 4.0).unwrap();
    for t in &m.masses {
        assert!((t - 0.5).abs() < 1e-6, "{m:?}");
    }
}

#[test]
fn spreading_sequence_leaves_its_mass_in_the_residual() {
    let g = centred_grid(2, 40.0, 0.125);
    let fields: Vec<ScalarField> = [8.0, 16.0, 32.0]
        .iter()
        .map(|&r| normalized(ScalarField::from_fn(g.clone(), |x| bump(x, &[0.0, 0.0], r)).unwrap(), 4.0))
        .collect();
    let e = extract_profiles(&fields, 4.0, &ProfileOptions::default()).unwrap();
    let m = brezis_lieb_masses(&e.items, &fields, 4.0).unwrap();
    assert!(m.total < 0.05, "{m:?}");
    assert!(m.deficit > 0.95);
}

#[test]
fn unnormalized_fields_are_rejected() {
    let g = centred_grid(2, 1.5, 1.0 / 16.0);
    let u = ScalarField::from_fn(g, |x| 3.0 * bump(x, &[0.0, 0.0], 1.0)).unwrap();
    let fields = vec![u; 2];
    let e = extract_profiles(&fields, 4.0, &opts()).unwrap();
    assert!(matches!(brezis_lieb_masses(&e.items, &fields, 4.0), Err(Error::Precondition(_))));
}
