use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs shared by the variational solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Blend factor θ ∈ (0, 1] between the current iterate and the update.
    pub damping: f64,
    /// Relative objective change that counts as converged.
    pub outer_tol: f64,
    /// Relative Euler–Lagrange residual that counts as converged.
    pub residual_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    /// `None` uses the CG default `10 √nodes √cond`.
    pub inner_max_iter: Option<usize>,
    /// Exponent for the constrained problems, `2 < p < 2*`.
    pub p: f64,
    /// One start per seed; seed 0 is the centred bump.
    pub seeds: Vec<u64>,
    pub positivity_projection: bool,
    /// Half-width of the box truncating whole-space problems.
    pub box_halfwidth: f64,
    /// ε in `A + ε (tr A / N) I` for near-degenerate inner solves.
    pub regularization: f64,
    /// Re-solve on a 1.5× box and compare objectives (whole-space problems).
    pub truncation_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 0.5,
            outer_tol: 1e-10,
            residual_tol: 1e-6,
            max_outer: 500,
            inner_tol: 1e-11,
            inner_max_iter: None,
            p: 4.0,
            seeds: (0..5).collect(),
            positivity_projection: true,
            box_halfwidth: 6.0,
            regularization: 1e-8,
            truncation_check: true,
        }
    }
}

/// `2N/(N−2)`, infinite for `N ≤ 2`.
pub fn critical_exponent(n: usize) -> f64 {
    if n <= 2 {
        f64::INFINITY
    } else {
        2.0 * n as f64 / (n as f64 - 2.0)
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} outside (0, 1]", self.damping));
        }
        if !(self.outer_tol > 0.0 && self.residual_tol > 0.0 && self.inner_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_outer == 0 {
            return bad("max_outer must be positive".into());
        }
        if !(self.box_halfwidth > 0.0 && self.box_halfwidth.is_finite()) {
            return bad("box half-width must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization must be nonnegative".into());
        }
        Ok(())
    }

    /// Checks `2 < p < 2*` for dimension `n`.
    pub fn validate_exponent(&self, n: usize) -> Result<()> {
        let crit = critical_exponent(n);
        if !(self.p > 2.0 && self.p < crit && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p = {} outside (2, {crit})", self.p)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_range() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.p = 6.0;
        assert!(c.validate_exponent(3).is_err());
        assert!(c.validate_exponent(2).is_ok());
        c.p = 2.0;
        assert!(c.validate_exponent(2).is_err());
        c.damping = 0.0;
        assert!(c.validate().is_err());
    }
}
