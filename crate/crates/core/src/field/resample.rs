use rayon::prelude::*;

use super::affine::AffineMap;
use super::grid::GridSpec;
use super::scalar::ScalarField;
use super::REDUCE_CHUNK;
use crate::error::{Error, Result};

const MAX_INTERP_DIM: usize = 16;

/// Multilinear interpolant of grid values, zero outside the grid box.
pub(crate) struct Interpolant<'a> {
    values: &'a [f64],
    shape: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<f64>,
    inv_h: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    pub(crate) fn new(grid: &GridSpec, values: &'a [f64]) -> Self {
        Interpolant {
            values,
            shape: grid.shape().to_vec(),
            strides: grid.strides(),
            origin: grid.origin().to_vec(),
            inv_h: grid.spacing().iter().map(|h| 1.0 / h).collect(),
        }
    }

    pub(crate) fn eval(&self, z: &[f64]) -> f64 {
        let n = self.shape.len();
        let mut base = 0usize;
        let mut frac = [0.0f64; MAX_INTERP_DIM];
        let mut step = [0usize; MAX_INTERP_DIM];
        for k in 0..n {
            let s = (z[k] - self.origin[k]) * self.inv_h[k];
            let top = (self.shape[k] - 1) as f64;
            // tolerate roundoff at the faces
            if !(s >= -1e-9 && s <= top + 1e-9) {
                return 0.0;
            }
            let s = s.clamp(0.0, top);
            let mut i = s.floor() as usize;
            if i + 1 >= self.shape[k] {
                i = self.shape[k] - 2;
            }
            frac[k] = s - i as f64;
            step[k] = self.strides[k];
            base += i * self.strides[k];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut off = base;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    off += step[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[off];
            }
        }
        acc
    }
}

fn check_invertible(map: &AffineMap) -> Result<()> {
    let n = map.dim();
    let det = map.det();
    let scale = map.matrix.frobenius().powi(n as i32).max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() <= 1e-14 * scale {
        return Err(Error::SingularMap(det));
    }
    Ok(())
}

fn sample_map(u: &ScalarField, map: &AffineMap, target: &GridSpec, factor: f64) -> Result<ScalarField> {
    if map.dim() != u.dim() || target.dim() != u.dim() {
        return Err(Error::GridMismatch("map, field and target dimensions differ".into()));
    }
    check_invertible(map)?;
    let interp = Interpolant::new(u.grid(), u.values());
    let mut out = vec![0.0; target.len()];
    out.par_chunks_mut(REDUCE_CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * REDUCE_CHUNK;
        for (o, slot) in chunk.iter_mut().enumerate() {
            let x = target.coords(base + o);
            *slot = factor * interp.eval(&map.apply(&x));
        }
    });
    ScalarField::new(target.clone(), out)
}

/// Samples `x ↦ u(T x + y)` on `target`.
pub fn resample(u: &ScalarField, map: &AffineMap, target: &GridSpec) -> Result<ScalarField> {
    sample_map(u, map, target, 1.0)
}

/// Largest supported `|j|`.
pub const MAX_DYADIC_LEVEL: i32 = 40;

/// Samples `x ↦ 2^{(N−2)j/2} u(2^j (x − y))` on `target`, the dilation
/// that preserves `‖∇u‖₂` and `‖u‖_{2*}`.
pub fn dyadic_rescale(u: &ScalarField, j: i32, y: &[f64], target: &GridSpec) -> Result<ScalarField> {
    let n = u.dim();
    if y.len() != n {
        return Err(Error::InvalidArgument("shift length differs from field dimension".into()));
    }
    if j.abs() > MAX_DYADIC_LEVEL {
        return Err(Error::ScaleRange(format!("dyadic level {j} outside ±{MAX_DYADIC_LEVEL}")));
    }
    let s = 2f64.powi(j);
    let map = AffineMap::new(
        crate::linalg::Mat::identity(n).scale(s),
        y.iter().map(|v| -s * v).collect(),
    )?;
    // the target window, mapped into source coordinates, must overlap the
    // source box and must not collapse inside a single source cell
    let (tlo, thi) = target.bounds();
    let (ilo, ihi) = map.image_bounds(&tlo, &thi);
    let (slo, shi) = u.grid().bounds();
    let overlap = (0..n).all(|k| ilo[k] < shi[k] && ihi[k] > slo[k]);
    if !overlap {
        return Err(Error::ScaleRange(format!("level {j}: target window misses the source grid")));
    }
    let collapsed = (0..n).any(|k| ihi[k] - ilo[k] < u.grid().spacing()[k]);
    if collapsed {
        return Err(Error::ScaleRange(format!("level {j}: target window is below source resolution")));
    }
    let factor = 2f64.powf((n as f64 - 2.0) * j as f64 / 2.0);
    sample_map(u, &map, target, factor)
}
