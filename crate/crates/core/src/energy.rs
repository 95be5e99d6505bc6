//! Gram matrix `A[u]_ij = ∫ ∂_i u ∂_j u`, the affine energy
//! `E₂ = N det(A)^{1/N}`, the functional `J₂ = ω_N^{-1/N} det(A)^{1/(2N)}`
//! and the unimodular map that makes `A[u∘T]` a multiple of the identity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::stencil::{gram_products, lp_norm, pointwise_gram};
use crate::field::{resample, AffineMap, GridSpec, ScalarField, UnimodularTransform};
use crate::linalg::{jacobi_eigen, qr_orthogonal, Mat};

/// Relative symmetry tolerance for a Gram matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// `det A ≤ DEGENERACY_RATIO · (tr A / N)^N` counts as singular.
pub const DEGENERACY_RATIO: f64 = 1e-12;
/// Relative distance of `A` from `(tr A/N) I` treated as exact isotropy.
pub const ISOTROPY_TOL: f64 = 1e-10;
/// Default condition-number cap for random SL(N) samples.
pub const DEFAULT_MAX_CONDITION: f64 = 100.0;

/// Symmetric positive semidefinite N×N matrix of integrated gradient products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    entries: Mat,
}

impl GramMatrix {
    pub fn new(entries: Mat) -> Result<Self> {
        check_symmetric(&entries)?;
        Ok(GramMatrix { entries: entries.symmetrized() })
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn matrix(&self) -> &Mat {
        &self.entries
    }

    pub fn det(&self) -> f64 {
        self.entries.det()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `det A ≤ 10⁻¹² (tr A / N)^N`, including the zero matrix.
    pub fn is_degenerate(&self) -> bool {
        let n = self.dim() as f64;
        let tr = self.trace();
        if !(tr > 0.0) {
            return true;
        }
        self.det() <= DEGENERACY_RATIO * (tr / n).powf(n)
    }

    /// `Tᵀ A T`, the Gram matrix of `u ∘ T`.
    pub fn transformed(&self, t: &Mat) -> GramMatrix {
        let m = &(&t.transpose() * &self.entries) * t;
        GramMatrix { entries: m.symmetrized() }
    }
}

fn check_symmetric(m: &Mat) -> Result<()> {
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Surface area of the unit sphere `S^{N−1} ⊂ ℝ^N`: `2π^{N/2} / Γ(N/2)`.
pub fn omega_n(n: usize) -> f64 {
    // Γ(N/2) by the half-integer recursion
    let mut gamma = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// Discrete `A[u]`.
///
/// Diagonal entries sum squared forward differences over grid edges; mixed
/// entries sum products of central differences over nodes interior along both
/// axes. This is the quadratic form whose derivative is the stencil operator
/// used by [`crate::operator`], so energy and Laplacian stay consistent.
pub fn gram_matrix(u: &ScalarField) -> GramMatrix {
    GramMatrix { entries: gram_products(u) }
}

/// `N det(A)^{1/N}`, or 0 for a degenerate matrix.
pub fn affine_energy(a: &GramMatrix) -> Result<f64> {
    check_symmetric(a.matrix())?;
    if a.is_degenerate() {
        return Ok(0.0);
    }
    let n = a.dim() as f64;
    Ok(n * a.det().powf(1.0 / n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct J2Value {
    pub value: f64,
    pub degenerate: bool,
}

/// `ω_N^{-1/N} det(A)^{1/(2N)}`; a singular matrix gives 0 with the flag set.
pub fn affine_sobolev_j2(a: &GramMatrix) -> Result<J2Value> {
    check_symmetric(a.matrix())?;
    if a.is_degenerate() {
        return Ok(J2Value { value: 0.0, degenerate: true });
    }
    let n = a.dim();
    let nf = n as f64;
    let value = omega_n(n).powf(-1.0 / nf) * a.det().powf(1.0 / (2.0 * nf));
    Ok(J2Value { value, degenerate: false })
}

/// Equal-weight direction sets on `S^{N−1}`: uniform angles on the circle, a
/// Fibonacci lattice on `S²`, seeded Gaussian directions above that.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1ec);
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-8 {
                        break v.into_iter().map(|x| x / norm).collect();
                    }
                })
                .collect()
        }
    }
}

/// Minimum direction counts accepted by [`j2_by_sphere_integral`].
pub fn min_directions(n: usize) -> usize {
    if n == 2 {
        50
    } else {
        200
    }
}

/// `(∫_{S^{N−1}} ‖ω·∇u‖₂^{−N} dS_ω)^{−1/N}` by equal-weight quadrature.
///
/// Directional norms come from the pointwise gradient, independently of
/// [`gram_matrix`]: `‖ω·∇u‖₂² = Σ_nodes (ω·∇u)² · vol`.
pub fn j2_by_sphere_integral(u: &ScalarField, directions: usize) -> Result<f64> {
    let n = u.dim();
    if directions < min_directions(n) {
        return Err(Error::InvalidArgument(format!(
            "need at least {} directions in dimension {n}",
            min_directions(n)
        )));
    }
    let g = GramMatrix::new(pointwise_gram(u)?)?;
    if g.is_degenerate() {
        return Err(Error::DegenerateGram { det: g.det(), trace: g.trace() });
    }
    let dirs = sphere_directions(n, directions);
    let mean = dirs
        .iter()
        .map(|w| {
            let aw = g.matrix().mul_vec(w);
            let q: f64 = w.iter().zip(&aw).map(|(a, b)| a * b).sum();
            q.powf(-(n as f64) / 2.0)
        })
        .sum::<f64>()
        / directions as f64;
    Ok((omega_n(n) * mean).powf(-1.0 / n as f64))
}

/// `T = T₀ T′` with `T₀` orthogonal diagonalizing `A` and
/// `T′ = det(A)^{1/(2N)} diag(λ)^{−1/2}`, so `Tᵀ A T = det(A)^{1/N} I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizingTransform {
    pub rotation: Mat,
    pub diagonal_scaling: Vec<f64>,
    pub composed: UnimodularTransform,
}

pub fn normalizing_transform(a: &GramMatrix) -> Result<NormalizingTransform> {
    check_symmetric(a.matrix())?;
    let n = a.dim();
    if !a.is_degenerate() {
        // isotropic to roundoff: any rotation diagonalizes, keep the identity
        let tau = a.trace() / n as f64;
        if a.matrix().sub(&Mat::identity(n).scale(tau)).frobenius() <= ISOTROPY_TOL * tau {
            return Ok(NormalizingTransform {
                rotation: Mat::identity(n),
                diagonal_scaling: vec![1.0; n],
                composed: UnimodularTransform::identity(n),
            });
        }
    }
    let eig = jacobi_eigen(a.matrix());
    let lmin = eig.values[n - 1];
    if !(lmin > 0.0) || a.is_degenerate() {
        if lmin < 0.0 && lmin.abs() > 1e-10 * a.trace().abs() {
            return Err(Error::NotPositiveDefinite);
        }
        return Err(Error::DegenerateGram { det: a.det(), trace: a.trace() });
    }
    let mut rotation = eig.vectors;
    if rotation.det() < 0.0 {
        for i in 0..n {
            rotation[(i, n - 1)] = -rotation[(i, n - 1)];
        }
    }
    let log_det: f64 = eig.values.iter().map(|l| l.ln()).sum();
    let mut scaling: Vec<f64> =
        eig.values.iter().map(|l| (log_det / (2.0 * n as f64) - 0.5 * l.ln()).exp()).collect();
    let mut composed = &rotation * &Mat::from_diag(&scaling);
    // absorb the roundoff in det T₀ and the exponentials
    let fix = composed.det().powf(-1.0 / n as f64);
    for s in &mut scaling {
        *s *= fix;
    }
    composed = &rotation * &Mat::from_diag(&scaling);
    Ok(NormalizingTransform {
        rotation,
        diagonal_scaling: scaling,
        composed: UnimodularTransform::from_matrix(composed)?,
    })
}

/// Random element of SL(N): a Haar-like orthogonal factor times a positive
/// diagonal of unit determinant with condition number at most `max_cond`.
pub fn random_unimodular<R: Rng + ?Sized>(n: usize, max_cond: f64, rng: &mut R) -> Mat {
    assert!(max_cond >= 1.0, "condition cap must be at least 1");
    let q = loop {
        let g: Vec<f64> = (0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if let Ok(q) = qr_orthogonal(&Mat::from_row_major(n, g).expect("square")) {
            break q;
        }
    };
    let mut q = q;
    if q.det() < 0.0 {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    let half = 0.5 * max_cond.ln();
    let logs: Vec<f64> = (0..n).map(|_| rng.random_range(-half..=half)).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = logs.iter().map(|l| (l - mean).exp()).collect();
    let t = &q * &Mat::from_diag(&d);
    // exact unit determinant
    t.scale(t.det().powf(-1.0 / n as f64))
}

#[derive(Clone, Debug)]
pub struct SampledMinOptions {
    pub max_condition: f64,
    /// Node cap for each resampled grid.
    pub max_nodes: usize,
    /// Relative threshold for the support box of `u`.
    pub support_rel: f64,
}

impl Default for SampledMinOptions {
    fn default() -> Self {
        SampledMinOptions { max_condition: DEFAULT_MAX_CONDITION, max_nodes: 1 << 22, support_rel: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledMin {
    pub sampled_min: f64,
    pub at_normalizer: f64,
    pub affine_energy: f64,
    pub samples: Vec<f64>,
}

/// `‖∇(u∘T)‖₂²` by resampling onto a grid fitted to `T`.
pub fn transformed_grad_norm_sq(u: &ScalarField, t: &Mat, opts: &SampledMinOptions) -> Result<f64> {
    let (lo, hi) = u.support_box(opts.support_rel);
    let base = u.grid().min_spacing();
    let n = u.dim();
    let target = GridSpec::fitted(&lo, &hi, t, &vec![0.0; n], base, opts.max_nodes)?;
    let v = resample(u, &AffineMap::linear(t.clone()), &target)?;
    Ok(gram_matrix(&v).trace())
}

/// Minimum of `‖∇(u∘T)‖₂²` over seeded random unimodular `T`, next to its
/// value at the normalizing transform. Sample `i` draws from stream `i` of
/// the seed, so results do not depend on scheduling.
pub fn energy_via_sampled_min(
    u: &ScalarField,
    n_samples: usize,
    seed: u64,
    opts: &SampledMinOptions,
) -> Result<SampledMin> {
    let a = gram_matrix(u);
    if a.is_degenerate() {
        return Err(Error::DegenerateGram { det: a.det(), trace: a.trace() });
    }
    let e2 = affine_energy(&a)?;
    let nt = normalizing_transform(&a)?;
    let at_normalizer = transformed_grad_norm_sq(u, nt.composed.matrix(), opts)?;
    let n = u.dim();
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let t = random_unimodular(n, opts.max_condition, &mut rng);
            transformed_grad_norm_sq(u, &t, opts)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sampled_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SampledMin { sampled_min, at_normalizer, affine_energy: e2, samples })
}

/// `‖u‖_{2*} / J₂(u)` with `2* = 2N/(N−2)`.
pub fn sobolev_ratio(u: &ScalarField) -> Result<f64> {
    let n = u.dim();
    if n < 3 {
        return Err(Error::InvalidArgument("critical exponent needs N ≥ 3".into()));
    }
    if u.is_zero() {
        return Err(Error::InvalidArgument("zero field".into()));
    }
    let a = gram_matrix(u);
    let j2 = affine_sobolev_j2(&a)?;
    if j2.degenerate {
        return Err(Error::DegenerateGram { det: a.det(), trace: a.trace() });
    }
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    Ok(lp_norm(u, p)? / j2.value)
}

/// Scalar energy figures for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dim: usize,
    pub h: f64,
    pub e2: f64,
    pub j2: f64,
    pub grad_norm_sq: f64,
    pub det_a: f64,
    pub degenerate: bool,
    pub gram: Mat,
}

pub fn energy_report(u: &ScalarField) -> Result<EnergyReport> {
    let a = gram_matrix(u);
    let j2 = affine_sobolev_j2(&a)?;
    Ok(EnergyReport {
        dim: u.dim(),
        h: u.grid().min_spacing(),
        e2: affine_energy(&a)?,
        j2: j2.value,
        grad_norm_sq: a.trace(),
        det_a: a.det(),
        degenerate: j2.degenerate,
        gram: a.matrix().clone(),
    })
}

pub const ENERGY_CSV_HEADER: &str = "field_id,N,h,E2,J2,grad_norm_sq,det_A,degenerate_flag";

impl EnergyReport {
    pub fn csv_row(&self, field_id: &str) -> String {
        format!(
            "{field_id},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.dim, self.h, self.e2, self.j2, self.grad_norm_sq, self.det_a, self.degenerate as u8
        )
    }
}
