use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Tolerance on `|det T - 1|` for a map to count as unimodular.
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// `x ↦ T x + y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Mat,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Mat, translation: Vec<f64>) -> Result<Self> {
        if translation.len() != matrix.dim() {
            return Err(Error::InvalidArgument("translation length differs from matrix size".into()));
        }
        if !matrix.is_finite() || translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("affine map has non-finite entries".into()));
        }
        Ok(AffineMap { matrix, translation })
    }

    pub fn linear(matrix: Mat) -> Self {
        let n = matrix.dim();
        AffineMap { matrix, translation: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::linear(Mat::identity(n))
    }

    pub fn translation(y: Vec<f64>) -> Self {
        AffineMap { matrix: Mat::identity(y.len()), translation: y }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn det(&self) -> f64 {
        self.matrix.det()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.mul_vec(x);
        for (o, t) in out.iter_mut().zip(&self.translation) {
            *o += t;
        }
        out
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let inv = self.matrix.inverse()?;
        let t = inv.mul_vec(&self.translation);
        Ok(AffineMap { matrix: inv, translation: t.into_iter().map(|v| -v).collect() })
    }

    /// `self ∘ other`: `x ↦ self(other(x))`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let matrix = &self.matrix * &other.matrix;
        let translation = self.apply(&other.translation);
        AffineMap { matrix, translation }
    }

    /// Bounding box of the image of the box `[lo, hi]`.
    pub fn image_bounds(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = lo.len();
        let mut blo = vec![f64::INFINITY; n];
        let mut bhi = vec![f64::NEG_INFINITY; n];
        for corner in 0..(1usize << n) {
            let c: Vec<f64> = (0..n).map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] }).collect();
            let p = self.apply(&c);
            for k in 0..n {
                blo[k] = blo[k].min(p[k]);
                bhi[k] = bhi[k].max(p[k]);
            }
        }
        (blo, bhi)
    }

    pub fn is_unimodular(&self) -> bool {
        (self.det() - 1.0).abs() <= UNIMODULAR_TOL
    }
}

/// An element of SL(N) together with an optional shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineMap", into = "AffineMap")]
pub struct UnimodularTransform(AffineMap);

impl UnimodularTransform {
    pub fn new(map: AffineMap) -> Result<Self> {
        let det = map.det();
        if (det - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::InvalidArgument(format!("det T = {det:.17e} is not 1")));
        }
        Ok(UnimodularTransform(map))
    }

    pub fn from_matrix(matrix: Mat) -> Result<Self> {
        Self::new(AffineMap::linear(matrix))
    }

    pub fn identity(n: usize) -> Self {
        UnimodularTransform(AffineMap::identity(n))
    }

    pub fn map(&self) -> &AffineMap {
        &self.0
    }

    pub fn matrix(&self) -> &Mat {
        &self.0.matrix
    }

    pub fn translation(&self) -> &[f64] {
        &self.0.translation
    }

    pub fn into_map(self) -> AffineMap {
        self.0
    }
}

impl TryFrom<AffineMap> for UnimodularTransform {
    type Error = Error;
    fn try_from(m: AffineMap) -> Result<Self> {
        Self::new(m)
    }
}

impl From<UnimodularTransform> for AffineMap {
    fn from(t: UnimodularTransform) -> AffineMap {
        t.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_compose() {
        let m = AffineMap::new(Mat::from_rows(&[vec![2.0, 1.0], vec![0.0, 0.5]]), vec![1.0, -2.0]).unwrap();
        let id = m.compose(&m.inverse().unwrap());
        let x = [0.3, -0.7];
        let y = id.apply(&x);
        assert!((y[0] - x[0]).abs() < 1e-14 && (y[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn unimodular_check() {
        let shear = Mat::from_rows(&[vec![1.0, 3.0], vec![0.0, 1.0]]);
        assert!(UnimodularTransform::from_matrix(shear).is_ok());
        assert!(UnimodularTransform::from_matrix(Mat::from_diag(&[2.0, 1.0])).is_err());
    }

    #[test]
    fn singular_map_has_no_inverse() {
        let m = AffineMap::linear(Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]));
        assert!(m.inverse().is_err());
    }
}
