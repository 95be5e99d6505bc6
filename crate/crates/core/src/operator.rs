//! The affine Laplacian `Δ_A u = det(A)^{1/N} Σ (A⁻¹)_ij ∂_i∂_j u` with
//! `A = A[u]`, its constant-coefficient linear solve and the comparison check.
//!
//! Sign convention: `Δ_A` is the (negative semidefinite) operator above, so
//! the Poisson Euler–Lagrange equation reads `Δ_A u + f = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{affine_energy, gram_matrix, normalizing_transform, GramMatrix};
use crate::error::{Error, Result};
use crate::field::reduce_sum;
use crate::field::stencil::{hessian, EllipticStencil};
use crate::field::{resample, AffineMap, DomainMask, GridSpec, ScalarField};
use crate::linalg::{jacobi_eigen, Mat};

pub use crate::energy::ISOTROPY_TOL;

/// `det(A)^{1/N} A⁻¹`, snapped to `I` when `A` is isotropic to
/// [`ISOTROPY_TOL`].
pub fn affine_coefficients(a: &GramMatrix) -> Result<Mat> {
    if a.is_degenerate() {
        return Err(Error::DegenerateGram { det: a.det(), trace: a.trace() });
    }
    let n = a.dim();
    let tau = a.trace() / n as f64;
    if a.matrix().sub(&Mat::identity(n).scale(tau)).frobenius() <= ISOTROPY_TOL * tau {
        return Ok(Mat::identity(n));
    }
    Ok(a.matrix().inverse()?.scale(a.det().powf(1.0 / n as f64)).symmetrized())
}

/// `Σ C_ij ∂_i∂_j u`. Masked fields use the zero-extension stencil at free
/// nodes (0 elsewhere); unmasked fields use the pointwise Hessian.
pub fn apply_coefficients(u: &ScalarField, c: &Mat) -> Result<ScalarField> {
    match u.mask() {
        Some(m) => {
            let st = EllipticStencil::new(u.grid(), c)?;
            let mut out = vec![0.0; u.values().len()];
            st.apply(m.free(), u.values(), &mut out);
            ScalarField::masked(m.clone(), out)
        }
        None => {
            let h = hessian(u)?;
            let n = u.dim();
            let mut out = vec![0.0; u.values().len()];
            for i in 0..n {
                for j in 0..n {
                    let cij = c[(i, j)];
                    if cij != 0.0 {
                        for (o, v) in out.iter_mut().zip(h.entry(i, j)) {
                            *o += cij * v;
                        }
                    }
                }
            }
            ScalarField::new(u.grid().clone(), out)
        }
    }
}

/// `Δ_A u` with `A = gram_matrix(u)` evaluated once.
pub fn affine_laplacian(u: &ScalarField) -> Result<ScalarField> {
    let c = affine_coefficients(&gram_matrix(u))?;
    apply_coefficients(u, &c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetCheck {
    pub fd: f64,
    pub pairing: f64,
    pub rel_err: f64,
}

/// Compares the central difference of `−½E₂` along `v` with `∫ Δ_A(u) v`.
///
/// For fields vanishing on the grid's outer face the discrete identity is
/// exact up to roundoff and the `O(ε²)` difference error.
pub fn frechet_check(u: &ScalarField, v: &ScalarField, eps: f64) -> Result<FrechetCheck> {
    if !(1e-8..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps {eps:e} outside [1e-8, 1e-2]")));
    }
    u.check_same_grid(v)?;
    let g = v.grid();
    let bad = (0..g.len()).find(|&i| v.values()[i] != 0.0 && (g.on_grid_edge(i) || v.mask().is_some_and(|m| !m.is_free(i))));
    if let Some(i) = bad {
        return Err(Error::Precondition(format!("direction field is nonzero on the boundary at node {i}")));
    }
    let e = |w: &ScalarField| -> Result<f64> { affine_energy(&gram_matrix(w)) };
    let plus = e(&u.add_scaled(v, eps)?)?;
    let minus = e(&u.add_scaled(v, -eps)?)?;
    let fd = (-0.5 * plus + 0.5 * minus) / (2.0 * eps);
    let pairing = affine_laplacian(u)?.inner(v)?;
    let scale = fd.abs().max(pairing.abs());
    let rel_err = if scale == 0.0 { 0.0 } else { (fd - pairing).abs() / scale };
    Ok(FrechetCheck { fd, pairing, rel_err })
}

/// Default CG tolerance on `‖r‖₂ / ‖f‖₂`.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// `10 · √(nodes) · √cond(M)`.
pub fn default_max_iter(nodes: usize, m: &GramMatrix) -> usize {
    let c = m.matrix().condition_number().max(1.0);
    (10.0 * (nodes as f64).sqrt() * c.sqrt()).ceil() as usize
}

#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub solution: ScalarField,
    pub iterations: usize,
    /// Final `‖r‖₂ / ‖f‖₂` over free nodes.
    pub relative_residual: f64,
}

fn check_spd(m: &GramMatrix) -> Result<()> {
    let eig = jacobi_eigen(m.matrix());
    if !(eig.values[m.dim() - 1] > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Conjugate gradients for `det(M)^{1/N} Σ (M⁻¹)_ij ∂_i∂_j u = −f` on the free
/// nodes of `mask`, zero on the rest.
pub fn constant_coeff_solve(
    m: &GramMatrix,
    f: &ScalarField,
    mask: &Arc<DomainMask>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<LinearSolve> {
    check_spd(m)?;
    if m.dim() != mask.grid().dim() {
        return Err(Error::GridMismatch("coefficient size differs from grid dimension".into()));
    }
    if !f.grid().same_as(mask.grid()) {
        return Err(Error::GridMismatch("right-hand side and mask grids differ".into()));
    }
    let n = m.dim();
    let c = m.matrix().inverse()?.scale(m.det().powf(1.0 / n as f64)).symmetrized();
    solve_with_coefficients(&c, f, mask, tol, max_iter.unwrap_or_else(|| default_max_iter(mask.grid().len(), m)))
}

/// CG on `−(Σ C_ij ∂_i∂_j) u = f`, `C` symmetric positive definite.
pub(crate) fn solve_with_coefficients(
    c: &Mat,
    f: &ScalarField,
    mask: &Arc<DomainMask>,
    tol: f64,
    max_iter: usize,
) -> Result<LinearSolve> {
    solve_shifted(c, None, f, mask, tol, max_iter, None)
}

/// CG on `(−Σ C_ij ∂_i∂_j + V) u = f` with `V ≥ 0` per node, optionally
/// warm-started from `x0`.
pub(crate) fn solve_shifted(
    c: &Mat,
    potential: Option<&[f64]>,
    f: &ScalarField,
    mask: &Arc<DomainMask>,
    tol: f64,
    max_iter: usize,
    x0: Option<&[f64]>,
) -> Result<LinearSolve> {
    let st = EllipticStencil::new(mask.grid(), c)?;
    let free = mask.free();
    let len = free.len();
    let b: Vec<f64> = (0..len).map(|i| if free[i] { f.values()[i] } else { 0.0 }).collect();
    let dot = |x: &[f64], y: &[f64]| reduce_sum(len, |i| x[i] * y[i]);
    let apply = |x: &[f64], out: &mut [f64]| {
        st.apply(free, x, out);
        match potential {
            Some(v) => {
                for i in 0..len {
                    out[i] = if free[i] { -out[i] + v[i] * x[i] } else { 0.0 };
                }
            }
            None => out.iter_mut().for_each(|o| *o = -*o),
        }
    };
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        let x = vec![0.0; len];
        return Ok(LinearSolve { solution: ScalarField::masked(mask.clone(), x)?, iterations: 0, relative_residual: 0.0 });
    }
    let mut x: Vec<f64> = match x0 {
        Some(x0) => (0..len).map(|i| if free[i] { x0[i] } else { 0.0 }).collect(),
        None => vec![0.0; len],
    };
    let mut ap = vec![0.0; len];
    let mut r = b.clone();
    if x0.is_some() {
        apply(&x, &mut ap);
        for i in 0..len {
            r[i] -= ap[i];
        }
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while rr.sqrt() > tol * bnorm {
        if it >= max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: rr.sqrt() / bnorm });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rr / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    // true residual, not the recursively updated one
    apply(&x, &mut ap);
    let res: Vec<f64> = (0..len).map(|i| b[i] - ap[i]).collect();
    let relative_residual = dot(&res, &res).sqrt() / bnorm;
    Ok(LinearSolve { solution: ScalarField::masked(mask.clone(), x)?, iterations: it, relative_residual })
}

/// `|⟨L u, v⟩ − ⟨u, L v⟩| / (‖L u‖‖v‖ + ‖u‖‖L v‖)` for the stencil of `C` on
/// masked fields.
pub fn stencil_symmetry_defect(c: &Mat, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.check_same_grid(v)?;
    let lu = apply_coefficients(u, c)?;
    let lv = apply_coefficients(v, c)?;
    let a = lu.inner(v)?;
    let b = u.inner(&lv)?;
    let norm = |w: &ScalarField| w.inner(w).map(f64::sqrt);
    let scale = norm(&lu)? * norm(v)? + norm(u)? * norm(&lv)?;
    Ok(if scale == 0.0 { 0.0 } else { (a - b).abs() / scale })
}

/// Discrete `‖Δ_A u − f‖₂ / ‖f‖₂` over the free nodes.
pub fn affine_residual(u: &ScalarField, f: &ScalarField) -> Result<f64> {
    u.check_same_grid(f)?;
    let lu = affine_laplacian(u)?;
    let free = |i: usize| u.mask().is_none_or(|m| m.is_free(i));
    let fv = f.values();
    let num = reduce_sum(fv.len(), |i| if free(i) { (lu.values()[i] - fv[i]).powi(2) } else { 0.0 });
    let den = reduce_sum(fv.len(), |i| if free(i) { fv[i] * fv[i] } else { 0.0 });
    Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataOrder {
    /// `f₁∘T₁⁻¹ ≥ f₂∘T₂⁻¹`
    FirstAbove,
    /// `f₁∘T₁⁻¹ ≤ f₂∘T₂⁻¹`
    FirstBelow,
    Equal,
    Unordered,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub data_order: DataOrder,
    /// Whether the solution ordering implied by the data ordering holds.
    pub holds: bool,
    pub violations: Vec<usize>,
    pub max_violation: f64,
    pub residuals: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct ComparisonOptions {
    /// Residual bound on `Δ_A(u_i) = f_i`.
    pub residual_tol: f64,
    /// Ordering slack relative to the largest value.
    pub order_tol: f64,
    pub max_listed: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions { residual_tol: 1e-6, order_tol: 1e-8, max_listed: 100 }
    }
}

fn pull_back(u: &ScalarField, t_inv: &AffineMap, target: &GridSpec) -> Result<ScalarField> {
    resample(&u.unmasked(), t_inv, target)
}

/// Checks that, for `Δ_A(u_i) = f_i`, data ordered as `f₁∘T₁⁻¹ ≥ f₂∘T₂⁻¹`
/// gives `u₁∘T₁⁻¹ ≤ u₂∘T₂⁻¹` node-wise (and the mirror case), with `T_i` the
/// normalizing transform of `A[u_i]`.
pub fn comparison_check(
    u1: &ScalarField,
    u2: &ScalarField,
    f1: &ScalarField,
    f2: &ScalarField,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    let r1 = affine_residual(u1, f1)?;
    let r2 = affine_residual(u2, f2)?;
    if r1 > opts.residual_tol || r2 > opts.residual_tol {
        return Err(Error::Precondition(format!(
            "inputs are not solutions: residuals {r1:e}, {r2:e} exceed {:e}",
            opts.residual_tol
        )));
    }
    let t1 = normalizing_transform(&gram_matrix(u1))?.composed.into_map();
    let t2 = normalizing_transform(&gram_matrix(u2))?.composed.into_map();
    // common grid covering both transformed supports
    let n = u1.dim();
    let (a_lo, a_hi) = u1.grid().bounds();
    let (b_lo, b_hi) = u2.grid().bounds();
    let (i1_lo, i1_hi) = t1.image_bounds(&a_lo, &a_hi);
    let (i2_lo, i2_hi) = t2.image_bounds(&b_lo, &b_hi);
    let lo: Vec<f64> = (0..n).map(|k| i1_lo[k].min(i2_lo[k])).collect();
    let hi: Vec<f64> = (0..n).map(|k| i1_hi[k].max(i2_hi[k])).collect();
    let h = u1.grid().min_spacing().min(u2.grid().min_spacing());
    let target = GridSpec::covering(&lo, &hi, h)?;
    let (t1i, t2i) = (t1.inverse()?, t2.inverse()?);
    let v1 = pull_back(u1, &t1i, &target)?;
    let v2 = pull_back(u2, &t2i, &target)?;
    let g1 = pull_back(f1, &t1i, &target)?;
    let g2 = pull_back(f2, &t2i, &target)?;
    let fscale = g1.max_abs().max(g2.max_abs()).max(f64::MIN_POSITIVE);
    let ftol = opts.order_tol * fscale;
    let above = g1.values().iter().zip(g2.values()).all(|(a, b)| a >= &(b - ftol));
    let below = g1.values().iter().zip(g2.values()).all(|(a, b)| a <= &(b + ftol));
    let data_order = match (above, below) {
        (true, true) => DataOrder::Equal,
        (true, false) => DataOrder::FirstAbove,
        (false, true) => DataOrder::FirstBelow,
        (false, false) => DataOrder::Unordered,
    };
    let uscale = v1.max_abs().max(v2.max_abs()).max(f64::MIN_POSITIVE);
    let utol = opts.order_tol * uscale;
    // signed excess of the ordering that should hold
    let excess = |i: usize| -> f64 {
        let (a, b) = (v1.values()[i], v2.values()[i]);
        match data_order {
            DataOrder::FirstAbove => a - b,
            DataOrder::FirstBelow => b - a,
            DataOrder::Equal => (a - b).abs(),
            DataOrder::Unordered => 0.0,
        }
    };
    let mut violations = Vec::new();
    let mut max_violation: f64 = 0.0;
    for i in 0..target.len() {
        let e = excess(i);
        if e > utol {
            max_violation = max_violation.max(e);
            if violations.len() < opts.max_listed {
                violations.push(i);
            }
        }
    }
    Ok(ComparisonReport {
        holds: max_violation == 0.0,
        data_order,
        violations,
        max_violation,
        residuals: [r1, r2],
    })
}
