//! Grids, domains, fields and the discrete operators on them.

pub mod affine;
pub mod grid;
pub mod io;
pub mod mask;
pub mod measure;
pub mod region;
pub mod resample;
pub mod scalar;
pub mod stencil;

use rayon::prelude::*;

pub use affine::{AffineMap, UnimodularTransform};
pub use grid::{GridLimits, GridSpec};
pub use mask::DomainMask;
pub use measure::{liminf_measure_estimate, MeasureEstimate};
pub use region::{AxisBox, Ball, LogStrip, Region, Transformed};
pub use resample::{dyadic_rescale, resample};
pub use scalar::ScalarField;
pub use stencil::{gradient, hessian, integrate, lp_norm, EllipticStencil, HessianField, VectorField};

/// Fixed work unit for parallel loops. Partial sums are combined in chunk
/// order, so results do not depend on the thread count.
pub const REDUCE_CHUNK: usize = 4096;

pub fn reduce_sum<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = 0.0;
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(len) {
                s += f(i);
            }
            s
        })
        .collect();
    partials.iter().sum()
}
