//! `κ′ = inf { E₂(u) + ∫ V u² : ‖u‖_p = 1 }` on a truncated box.

use std::sync::Arc;

use super::config::SolverConfig;
use super::ground_state::{EnergyKind, Problem};
use super::report::SolveReport;
use crate::error::{Error, Result};
use crate::field::resample::Interpolant;
use crate::field::{DomainMask, GridSpec, ScalarField};

/// Relative change of κ′ under box growth above which the run is flagged.
pub const TRUNCATION_LIMIT: f64 = 0.01;
/// Allowed distance of `V` from 1 on the outer face before flagging.
pub const BOUNDARY_SLACK: f64 = 1e-3;

fn check_potential(v: &ScalarField) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    if let Some(x) = v.values().iter().find(|&&x| x > 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("potential exceeds 1 ({x})")));
    }
    if let Some(x) = v.values().iter().find(|&&x| x < 0.0) {
        return Err(Error::InvalidArgument(format!("potential is negative ({x}); the inner operator needs V ≥ 0")));
    }
    let g = v.grid();
    let off = (0..g.len()).filter(|&i| g.on_grid_edge(i)).map(|i| (1.0 - v.values()[i]).abs()).fold(0.0, f64::max);
    if off > BOUNDARY_SLACK {
        flags.push(format!("potential_not_one_on_boundary({off:.3e})"));
    }
    Ok(flags)
}

/// Grid with the same spacing grown by a quarter of its extent on each side
/// (1.5× in total), with `V` extended by 1.
fn enlarged(v: &ScalarField) -> Result<ScalarField> {
    let g = v.grid();
    let n = g.dim();
    let extra: Vec<usize> = g.shape().iter().map(|&s| ((s - 1) as f64 * 0.25).round() as usize).collect();
    let shape: Vec<usize> = (0..n).map(|k| g.shape()[k] + 2 * extra[k]).collect();
    let origin: Vec<f64> = (0..n).map(|k| g.origin()[k] - extra[k] as f64 * g.spacing()[k]).collect();
    let big = GridSpec::new(shape, g.spacing().to_vec(), origin)?;
    let interp = Interpolant::new(g, v.values());
    let (lo, hi) = g.bounds();
    ScalarField::from_fn(big, |x| {
        let inside = (0..n).all(|k| x[k] >= lo[k] - 1e-12 && x[k] <= hi[k] + 1e-12);
        if inside {
            interp.eval(x)
        } else {
            1.0
        }
    })
}

fn solve_on(v: &ScalarField, p: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    let mask = Arc::new(DomainMask::full(v.grid().clone())?);
    Problem { mask: &mask, p, potential: Some(v.values()), energy: EnergyKind::Affine, cfg }.solve("penalty")
}

/// Minimizes `E₂(u) + ∫ V u²` at `‖u‖_p = 1` over fields vanishing on the
/// outer face of `V`'s grid. The multiplier is `λ = κ′` in
/// `−Δ_A u + V u = λ u^{p−1}`; `λ^{1/(p−2)} u` solves it with `λ = 1`.
pub fn penalty_ground_state(v: &ScalarField, p: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    let flags = check_potential(v)?;
    let mut cfg = cfg.clone();
    cfg.p = p;
    let mut report = solve_on(v, p, &cfg)?;
    report.flags.extend(flags);
    if cfg.truncation_check {
        let big = enlarged(v)?;
        let mut one = cfg.clone();
        one.seeds = vec![report.best_seed];
        let r2 = solve_on(&big, p, &one)?;
        let sens = (r2.objective - report.objective).abs() / report.objective.abs();
        report.enlarged_objective = Some(r2.objective);
        report.truncation_sensitivity = Some(sens);
        if sens > TRUNCATION_LIMIT {
            report.flags.push("truncation_sensitive".into());
        }
    }
    Ok(report)
}
