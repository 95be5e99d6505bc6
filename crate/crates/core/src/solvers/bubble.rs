//! Affine quotient `E₂(u) / ‖u‖²_{2*}` of the critical bubble and its
//! unimodular images.

use serde::{Deserialize, Serialize};

use crate::energy::{affine_energy, gram_matrix, omega_n};
use crate::error::{Error, Result};
use crate::field::stencil::lp_norm;
use crate::field::{GridSpec, ScalarField, UnimodularTransform};
use crate::linalg::Mat;

use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BubbleOptions {
    /// The bubble is multiplied by a smooth radial cutoff that is 1 up to
    /// half this radius and 0 beyond it.
    pub window_radius: f64,
    /// Base grid spacing before fitting to each transform.
    pub h: f64,
    pub max_nodes: usize,
    pub max_condition: f64,
    /// Allowed relative spread of the affine quotient.
    pub tol: f64,
    /// Simpson panels for the radial reference.
    pub radial_panels: usize,
}

impl Default for BubbleOptions {
    fn default() -> Self {
        BubbleOptions {
            window_radius: 4.0,
            h: 0.1,
            max_nodes: 1 << 22,
            max_condition: 10.0,
            tol: 0.02,
            radial_panels: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleEntry {
    pub matrix: Mat,
    pub condition: f64,
    pub affine_quotient: f64,
    pub gradient_quotient: f64,
    /// `|affine − reference| / reference`, reference the `T = I` value.
    pub deviation: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    pub dim: usize,
    pub window_radius: f64,
    /// Quotient of the windowed bubble from one-dimensional radial quadrature.
    pub radial_quotient: f64,
    /// Quotient of the untruncated bubble, the sharp Sobolev constant.
    pub sobolev_constant: f64,
    /// Grid value at `T = I`.
    pub identity_quotient: f64,
    pub entries: Vec<BubbleEntry>,
    pub max_deviation: f64,
    pub within_tolerance: bool,
}

/// `(N(N−2)/4) |S^N|^{2/N}`.
pub fn sobolev_constant(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf - 2.0) / 4.0 * omega_n(n + 1).powf(2.0 / nf)
}

fn cutoff(s: f64) -> (f64, f64) {
    // value and derivative in s
    if s <= 0.5 {
        (1.0, 0.0)
    } else if s >= 1.0 {
        (0.0, 0.0)
    } else {
        let a = PI * (s - 0.5);
        (a.cos().powi(2), -PI * (2.0 * a).sin())
    }
}

/// Windowed bubble `(1 + r²)^{−(N−2)/2} χ(r/R)` and its radial derivative.
pub fn windowed_bubble(n: usize, radius: f64, r: f64) -> (f64, f64) {
    let e = (n as f64 - 2.0) / 2.0;
    let b = (1.0 + r * r).powf(-e);
    let db = -2.0 * e * r * (1.0 + r * r).powf(-e - 1.0);
    let (c, dc) = cutoff(r / radius);
    (b * c, db * c + b * dc / radius)
}

/// Radial-quadrature quotient `‖∇U_R‖² / ‖U_R‖²_{2*}` of the windowed bubble.
pub fn radial_bubble_quotient(n: usize, radius: f64, panels: usize) -> f64 {
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    let m = panels + panels % 2;
    let h = radius / m as f64;
    let (mut g, mut q) = (0.0, 0.0);
    for i in 0..=m {
        let r = i as f64 * h;
        let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let (u, du) = windowed_bubble(n, radius, r);
        let jac = r.powi(n as i32 - 1);
        g += w * du * du * jac;
        q += w * u.abs().powf(p) * jac;
    }
    let s = omega_n(n) * h / 3.0;
    (s * g) / (s * q).powf(2.0 / p)
}

/// Evaluates the affine and gradient quotients of `U_R ∘ T` for each
/// transform on grids fitted to `T`, against the radial reference.
pub fn critical_bubble_check(
    n: usize,
    transforms: &[UnimodularTransform],
    opts: &BubbleOptions,
) -> Result<BubbleReport> {
    if n < 3 {
        return Err(Error::InvalidArgument("the critical exponent needs N ≥ 3".into()));
    }
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    let radius = opts.window_radius;
    let evaluate = |t: &UnimodularTransform| -> Result<BubbleEntry> {
        if t.map().dim() != n {
            return Err(Error::InvalidArgument("transform dimension differs from N".into()));
        }
        let m = t.matrix();
        let cond = m.condition_number();
        if cond > opts.max_condition {
            return Err(Error::InvalidArgument(format!(
                "transform condition number {cond:.3} exceeds {}",
                opts.max_condition
            )));
        }
        let lo = vec![-radius; n];
        let hi = vec![radius; n];
        let grid = GridSpec::fitted(&lo, &hi, m, t.translation(), opts.h, opts.max_nodes)?;
        let fitted_h: f64 = (0..n)
            .map(|k| grid.spacing()[k] * m.col(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if fitted_h > 1.5 * opts.h {
            return Err(Error::InvalidArgument(format!(
                "transform too ill-conditioned for the node cap (effective spacing {fitted_h:.3})"
            )));
        }
        let map = t.map();
        let u = ScalarField::from_fn(grid.clone(), |x| {
            let y = map.apply(x);
            windowed_bubble(n, radius, y.iter().map(|v| v * v).sum::<f64>().sqrt()).0
        })?;
        let a = gram_matrix(&u);
        let norm2 = lp_norm(&u, p)?.powi(2);
        Ok(BubbleEntry {
            matrix: m.clone(),
            condition: cond,
            affine_quotient: affine_energy(&a)? / norm2,
            gradient_quotient: a.trace() / norm2,
            deviation: 0.0,
            nodes: grid.len(),
        })
    };
    let identity = evaluate(&UnimodularTransform::identity(n))?;
    let mut entries = transforms.iter().map(evaluate).collect::<Result<Vec<_>>>()?;
    let reference = identity.affine_quotient;
    for e in &mut entries {
        e.deviation = (e.affine_quotient - reference).abs() / reference;
    }
    let max_deviation = entries.iter().map(|e| e.deviation).fold(0.0, f64::max);
    Ok(BubbleReport {
        dim: n,
        window_radius: radius,
        radial_quotient: radial_bubble_quotient(n, radius, opts.radial_panels),
        sobolev_constant: sobolev_constant(n),
        identity_quotient: reference,
        entries,
        max_deviation,
        within_tolerance: max_deviation <= opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharp_constant_in_three_dimensions() {
        let s = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert!((sobolev_constant(3) - s).abs() < 1e-12);
    }

    #[test]
    fn wide_window_approaches_sharp_constant() {
        // the truncation error decays like 1/R
        let s = sobolev_constant(3);
        let err: Vec<f64> = [25.0, 100.0, 400.0]
            .iter()
            .map(|&r| radial_bubble_quotient(3, r, 400_000) / s - 1.0)
            .collect();
        assert!(err.iter().all(|&e| e > 0.0), "{err:?}");
        assert!(err[2] < 0.015, "{err:?}");
        for w in err.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "{err:?}");
        }
    }

    #[test]
    fn cutoff_is_continuous() {
        assert!((cutoff(0.5).0 - 1.0).abs() < 1e-15 && cutoff(1.0).0.abs() < 1e-15);
        assert!(cutoff(0.75).1 < 0.0);
    }
}
