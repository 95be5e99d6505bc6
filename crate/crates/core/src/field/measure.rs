//! Monte-Carlo estimate of `|⋂_{k<n} T_k⁻¹(Ω − y_k)|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::affine::AffineMap;
use super::region::Region;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Debug, Default)]
pub struct MeasureOptions {
    /// Sampling box; required when the region is unbounded.
    pub window: Option<(Vec<f64>, Vec<f64>)>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub prefix: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub window_lo: Vec<f64>,
    pub window_hi: Vec<f64>,
    pub window_volume: f64,
    pub samples: usize,
    pub hits: usize,
}

/// Estimates the measure of the intersection of the first `prefix` sets
/// `T_k⁻¹(Ω − y_k) = { x : T_k x + y_k ∈ Ω }`, the finite stand-in for the
/// liminf of the sequence.
///
/// Without an explicit window the sampling box is the intersection of the
/// bounding boxes of the preimages; if that is empty the intersection is
/// empty and the estimate is exactly 0.
pub fn liminf_measure_estimate<R: Region + ?Sized>(
    region: &R,
    maps: &[AffineMap],
    prefix: usize,
    samples: usize,
    opts: &MeasureOptions,
) -> Result<MeasureEstimate> {
    let n = region.dim();
    if prefix == 0 || prefix > maps.len() {
        return Err(Error::InvalidArgument(format!("prefix {prefix} not in 1..={}", maps.len())));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    if maps.iter().any(|m| m.dim() != n) {
        return Err(Error::GridMismatch("map dimension differs from region dimension".into()));
    }
    let maps = &maps[..prefix];
    let (lo, hi) = match &opts.window {
        Some((lo, hi)) => {
            if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                return Err(Error::EmptyWindow);
            }
            (lo.clone(), hi.clone())
        }
        None => {
            let (rlo, rhi) = region.bounding_box().ok_or_else(|| {
                Error::InvalidArgument("unbounded region needs an explicit sampling window".into())
            })?;
            let mut lo = vec![f64::NEG_INFINITY; n];
            let mut hi = vec![f64::INFINITY; n];
            for m in maps {
                let (blo, bhi) = m.inverse()?.image_bounds(&rlo, &rhi);
                for k in 0..n {
                    lo[k] = lo[k].max(blo[k]);
                    hi[k] = hi[k].min(bhi[k]);
                }
            }
            if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
                return Ok(MeasureEstimate {
                    prefix,
                    estimate: 0.0,
                    std_error: 0.0,
                    window_lo: lo,
                    window_hi: hi,
                    window_volume: 0.0,
                    samples: 0,
                    hits: 0,
                });
            }
            (lo, hi)
        }
    };
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..samples {
        for k in 0..n {
            x[k] = rng.random_range(lo[k]..hi[k]);
        }
        if maps.iter().all(|m| region.contains(&m.apply(&x))) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    Ok(MeasureEstimate {
        prefix,
        estimate: volume * f,
        std_error: volume * (f * (1.0 - f) / samples as f64).sqrt(),
        window_lo: lo,
        window_hi: hi,
        window_volume: volume,
        samples,
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::region::Ball;

    #[test]
    fn identity_maps_give_region_volume() {
        let ball = Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let maps = vec![AffineMap::identity(2); 4];
        let e = liminf_measure_estimate(&ball, &maps, 4, 20_000, &MeasureOptions::default()).unwrap();
        assert!((e.estimate - std::f64::consts::PI).abs() <= 3.0 * e.std_error);
    }

    #[test]
    fn argument_checks() {
        let ball = Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let maps = vec![AffineMap::identity(2); 2];
        let o = MeasureOptions::default();
        assert!(liminf_measure_estimate(&ball, &maps, 3, 5000, &o).is_err());
        assert!(liminf_measure_estimate(&ball, &maps, 1, 10, &o).is_err());
        let bad = MeasureOptions { window: Some((vec![0.0, 0.0], vec![0.0, 1.0])), seed: 0 };
        assert!(matches!(liminf_measure_estimate(&ball, &maps, 1, 5000, &bad), Err(Error::EmptyWindow)));
    }
}
