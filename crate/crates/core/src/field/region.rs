//! Point-membership descriptions of domains Ω ⊂ ℝ^N.

use serde::{Deserialize, Serialize};

use super::affine::AffineMap;

/// A measurable set described by a membership test.
pub trait Region: Send + Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    /// Axis-aligned box containing the region, or `None` when unbounded.
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)>;
}

impl<R: Region + ?Sized> Region for Box<R> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn contains(&self, x: &[f64]) -> bool {
        (**self).contains(x)
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        (**self).bounding_box()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Region for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn contains(&self, x: &[f64]) -> bool {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        r2 <= self.radius * self.radius
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        ))
    }
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }
}

impl Region for AxisBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn contains(&self, x: &[f64]) -> bool {
        // relative slack keeps nodes that sit exactly on a face inside
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| {
            let eps = 1e-12 * (1.0 + a.abs().max(b.abs()));
            *v >= a - eps && *v <= b + eps
        })
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.lo.clone(), self.hi.clone()))
    }
}

/// `{ (x₁, x̄) : |x̄| < (1 + log|x₁|)⁻¹ }`, read literally: points where
/// `1 + log|x₁| ≤ 0` are excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogStrip {
    pub dim: usize,
}

impl Region for LogStrip {
    fn dim(&self) -> usize {
        self.dim
    }
    fn contains(&self, x: &[f64]) -> bool {
        let denom = 1.0 + x[0].abs().ln();
        if !(denom > 0.0) {
            return false;
        }
        let rest: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        rest < 1.0 / denom
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Image `{ T x + y : x ∈ R }` of a region under an invertible affine map.
pub struct Transformed<R> {
    pub region: R,
    pub map: AffineMap,
    inverse: AffineMap,
}

impl<R: Region> Transformed<R> {
    pub fn new(region: R, map: AffineMap) -> crate::Result<Self> {
        let inverse = map.inverse()?;
        Ok(Transformed { region, map, inverse })
    }
}

impl<R: Region> Region for Transformed<R> {
    fn dim(&self) -> usize {
        self.region.dim()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.region.contains(&self.inverse.apply(x))
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.region.bounding_box()?;
        Some(self.map.image_bounds(&lo, &hi))
    }
}
