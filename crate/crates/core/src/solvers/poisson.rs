//! `κ_f = inf ½E₂(u) − ∫ f u` over `H₀^{1,2}(Ω)`.
//!
//! Alternating minimization: `½E₂(u) = min_{det P = 1} ½ tr(P A[u])`. For
//! fixed `P = det(A[u_k])^{1/N} A[u_k]⁻¹` the minimizer in `u` solves the
//! linear problem `−Σ P_ij ∂_i∂_j u = f`; blending with the previous iterate
//! keeps the objective non-increasing because the frozen objective is convex.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::SolverConfig;
use super::init::{initial_bump, torsion};
use super::report::{SolveReport, StartSummary, TraceRow};
use crate::energy::{affine_energy, gram_matrix, GramMatrix};
use crate::error::{Error, Result};
use crate::field::{DomainMask, ScalarField};
use crate::linalg::Mat;
use crate::operator::{affine_coefficients, affine_residual, default_max_iter, solve_shifted};

struct Run {
    seed: u64,
    u: ScalarField,
    objective: f64,
    residual: f64,
    trace: Vec<TraceRow>,
    converged: bool,
    iterations: usize,
    flags: Vec<String>,
}

fn objective(u: &ScalarField, f: &ScalarField) -> Result<f64> {
    Ok(0.5 * affine_energy(&gram_matrix(u))? - u.inner(f)?)
}

fn coefficients(a: &GramMatrix, eps: f64, flags: &mut Vec<String>) -> Result<Mat> {
    if a.is_degenerate() {
        if !flags.iter().any(|f| f == "regularized") {
            flags.push("regularized".into());
        }
        let n = a.dim();
        let shift = eps * a.trace().max(f64::MIN_POSITIVE) / n as f64;
        return affine_coefficients(&GramMatrix::new(a.matrix().add(&Mat::identity(n).scale(shift)))?);
    }
    affine_coefficients(a)
}

fn run(f: &ScalarField, neg_f: &ScalarField, mask: &Arc<DomainMask>, u0: ScalarField, seed: u64, cfg: &SolverConfig) -> Result<Run> {
    let mut flags = Vec::new();
    let mut u = u0;
    let mut obj = objective(&u, f)?;
    let mut trace = vec![TraceRow { iter: 0, residual_norm: affine_residual(&u, neg_f)?, energy: obj }];
    let mut warm: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = trace[0].residual_norm;
    for it in 1..=cfg.max_outer {
        iterations = it;
        let c = coefficients(&gram_matrix(&u), cfg.regularization, &mut flags)?;
        let max_iter = cfg
            .inner_max_iter
            .unwrap_or_else(|| default_max_iter(mask.grid().len(), &GramMatrix::new(c.clone()).expect("symmetric")));
        let sol = solve_shifted(&c, None, f, mask, cfg.inner_tol, max_iter, warm.as_deref())?.solution;
        let next = u.scaled(1.0 - cfg.damping).add_scaled(&sol, cfg.damping)?;
        warm = Some(sol.into_values());
        let new_obj = objective(&next, f)?;
        residual = affine_residual(&next, neg_f)?;
        trace.push(TraceRow { iter: it, residual_norm: residual, energy: new_obj });
        let change = (obj - new_obj).abs() / new_obj.abs().max(f64::MIN_POSITIVE);
        u = next;
        obj = new_obj;
        if change <= cfg.outer_tol && residual <= cfg.residual_tol {
            converged = true;
            break;
        }
    }
    Ok(Run { seed, u, objective: obj, residual, trace, converged, iterations, flags })
}

/// Minimizes `½E₂(u) − ∫ f u` on the free nodes of `mask`; the minimizer
/// solves `Δ_A u + f = 0`.
pub fn solve_affine_poisson(f: &ScalarField, mask: &Arc<DomainMask>, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !f.grid().same_as(mask.grid()) {
        return Err(Error::GridMismatch("data and mask grids differ".into()));
    }
    // data restricted to the free nodes
    let f = ScalarField::masked(
        mask.clone(),
        f.values().iter().enumerate().map(|(i, &v)| if mask.is_free(i) { v } else { 0.0 }).collect(),
    )?;
    if f.is_zero() {
        let u = ScalarField::zeros_masked(mask.clone());
        return Ok(SolveReport {
            problem: "poisson".into(),
            gram: gram_matrix(&u).matrix().clone(),
            minimizer: u,
            rescaled: None,
            objective: 0.0,
            pde_residual: 0.0,
            lagrange_multiplier: None,
            rescale_factor: None,
            rescaled_residual: None,
            converged: true,
            iterations: 0,
            trace: vec![TraceRow { iter: 0, residual_norm: 0.0, energy: 0.0 }],
            best_seed: cfg.seeds[0],
            starts: Vec::new(),
            flags: vec!["zero_data".into()],
            enlarged_objective: None,
            truncation_sensitivity: None,
        });
    }
    let neg_f = f.scaled(-1.0);
    let tors = torsion(mask)?;
    let runs: Vec<Run> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run(&f, &neg_f, mask, initial_bump(mask, &tors, seed)?, seed, cfg))
        .collect::<Vec<Result<Run>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let starts = runs
        .iter()
        .map(|r| StartSummary {
            seed: r.seed,
            objective: r.objective,
            iterations: r.iterations,
            converged: r.converged,
            pde_residual: r.residual,
        })
        .collect();
    let pick = |only_converged: bool| {
        runs.iter()
            .enumerate()
            .filter(|(_, r)| r.converged || !only_converged)
            .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    };
    let best = pick(true).or_else(|| pick(false)).expect("at least one start");
    let r = runs.into_iter().nth(best).expect("index in range");
    let mut flags = r.flags;
    if !(r.objective < 0.0) {
        flags.push("nonnegative_objective".into());
    }
    if !r.converged {
        flags.push("not_converged".into());
    }
    Ok(SolveReport {
        problem: "poisson".into(),
        gram: gram_matrix(&r.u).matrix().clone(),
        minimizer: r.u,
        rescaled: None,
        objective: r.objective,
        pde_residual: r.residual,
        lagrange_multiplier: None,
        rescale_factor: None,
        rescaled_residual: None,
        converged: r.converged,
        iterations: r.iterations,
        trace: r.trace,
        best_seed: r.seed,
        starts,
        flags,
        enlarged_objective: None,
        truncation_sensitivity: None,
    })
}
