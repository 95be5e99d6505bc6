//! Starting iterates.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{DomainMask, ScalarField};
use crate::linalg::Mat;
use crate::operator::solve_with_coefficients;

/// Torsion function `−Δτ = 1`, zero on the mask boundary: positive, smooth
/// inside and adapted to the mask shape.
pub fn torsion(mask: &Arc<DomainMask>) -> Result<ScalarField> {
    let one = ScalarField::from_fn(mask.grid().clone(), |_| 1.0)?;
    let n = mask.grid().dim();
    let max_iter = 20 * mask.grid().len().max(100);
    Ok(solve_with_coefficients(&Mat::identity(n), &one, mask, 1e-12, max_iter)?.solution)
}

/// Seed 0 gives the torsion bump itself; other seeds modulate it by a random
/// anisotropic positive factor.
pub fn initial_bump(mask: &Arc<DomainMask>, torsion: &ScalarField, seed: u64) -> Result<ScalarField> {
    if seed == 0 {
        return Ok(torsion.clone());
    }
    let g = mask.grid();
    let n = g.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    g.for_each_node(|i, x| {
        if mask.is_free(i) {
            for k in 0..n {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tilt: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let squash: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.5)).collect();
    let power = rng.random_range(1.0..2.0);
    let t = torsion.values();
    let mut values = vec![0.0; g.len()];
    g.for_each_node(|i, x| {
        if mask.is_free(i) {
            let mut e = 0.0;
            for k in 0..n {
                let c = 0.5 * (lo[k] + hi[k]);
                let r = (0.5 * (hi[k] - lo[k])).max(f64::MIN_POSITIVE);
                let s = (x[k] - c) / r;
                e += tilt[k] * s + squash[k] * s * s;
            }
            values[i] = t[i].max(0.0).powf(power) * e.exp();
        }
    });
    ScalarField::masked(mask.clone(), values)
}
