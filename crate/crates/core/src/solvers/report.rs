use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::linalg::Mat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub residual_norm: f64,
    pub energy: f64,
}

/// Outcome of one start of a multi-start run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub seed: u64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub pde_residual: f64,
}

/// Result of a variational solve. Fields are kept out of the serialized form;
/// write them separately in the AFLD format.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub problem: String,
    #[serde(skip)]
    pub minimizer: ScalarField,
    /// `c · minimizer` solving the unscaled equation, when applicable.
    #[serde(skip)]
    pub rescaled: Option<ScalarField>,
    /// κ_f, κ_p or κ′.
    pub objective: f64,
    pub gram: Mat,
    /// Relative residual of the Euler–Lagrange equation at the minimizer.
    pub pde_residual: f64,
    pub lagrange_multiplier: Option<f64>,
    /// Rescale factor `c` and the residual of the rescaled equation.
    pub rescale_factor: Option<f64>,
    pub rescaled_residual: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub best_seed: u64,
    pub starts: Vec<StartSummary>,
    pub flags: Vec<String>,
    /// Objective on the enlarged box, for truncated whole-space problems.
    pub enlarged_objective: Option<f64>,
    pub truncation_sensitivity: Option<f64>,
}

impl SolveReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,residual_norm,energy\n");
        for r in &self.trace {
            s.push_str(&format!("{},{:.16e},{:.16e}\n", r.iter, r.residual_norm, r.energy));
        }
        s
    }

    /// Largest relative increase of the objective between iterations.
    pub fn max_objective_increase(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}
