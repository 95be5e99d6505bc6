//! Variational solvers: affine Poisson, subcritical ground states, the
//! penalty problem and the critical-bubble check.

pub mod bubble;
pub mod config;
pub mod ground_state;
pub mod init;
pub mod penalty;
pub mod poisson;
pub mod report;

pub use bubble::{critical_bubble_check, BubbleOptions, BubbleReport};
pub use config::{critical_exponent, SolverConfig};
pub use ground_state::{classical_ground_state, ground_state, rescale_to_pde};
pub use penalty::penalty_ground_state;
pub use poisson::solve_affine_poisson;
pub use report::{SolveReport, StartSummary, TraceRow};
