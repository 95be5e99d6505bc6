use std::sync::Arc;

use super::grid::GridSpec;
use super::mask::DomainMask;
use super::reduce_sum;
use crate::error::{Error, Result};

/// Samples of a function on a grid, optionally restricted to a mask.
///
/// Masked fields model H₀^{1,2}(Ω) by zero extension: every node that is not
/// a free node of the mask carries the value 0.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    mask: Option<Arc<DomainMask>>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScalarField { grid, values, mask: None })
    }

    /// Masked field; values off the free nodes must be exactly zero.
    pub fn masked(mask: Arc<DomainMask>, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::new(mask.grid().clone(), values)?;
        if let Some(i) = (0..f.values.len()).find(|&i| !mask.is_free(i) && f.values[i] != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "masked field is nonzero at boundary/outside node {i}"
            )));
        }
        f.mask = Some(mask);
        Ok(f)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![0.0; n], mask: None }
    }

    pub fn zeros_masked(mask: Arc<DomainMask>) -> Self {
        let n = mask.grid().len();
        ScalarField { grid: mask.grid().clone(), values: vec![0.0; n], mask: Some(mask) }
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: GridSpec, mut f: F) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        grid.for_each_node(|flat, x| values[flat] = f(x));
        Self::new(grid, values)
    }

    /// Samples `f` on free nodes and pins every other node to zero.
    pub fn from_fn_masked<F: FnMut(&[f64]) -> f64>(mask: Arc<DomainMask>, mut f: F) -> Result<Self> {
        let grid = mask.grid().clone();
        let mut values = vec![0.0; grid.len()];
        grid.for_each_node(|flat, x| {
            if mask.is_free(flat) {
                values[flat] = f(x);
            }
        });
        Self::masked(mask, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mask(&self) -> Option<&Arc<DomainMask>> {
        self.mask.as_ref()
    }

    pub fn is_masked(&self) -> bool {
        self.mask.is_some()
    }

    /// Same grid and mask, new values (re-validated; masked values are
    /// projected onto the free nodes).
    pub fn with_values(&self, mut values: Vec<f64>) -> Result<Self> {
        if let Some(m) = &self.mask {
            for (i, v) in values.iter_mut().enumerate() {
                if !m.is_free(i) {
                    *v = 0.0;
                }
            }
        }
        let mut f = Self::new(self.grid.clone(), values)?;
        f.mask = self.mask.clone();
        Ok(f)
    }

    /// Drops the mask, keeping the zero-extended values.
    pub fn unmasked(&self) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.clone(), mask: None }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    /// `self + s · other` on a shared grid.
    pub fn add_scaled(&self, other: &ScalarField, s: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        self.with_values(values)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    /// Nodes counted by quadrature: the inside set of the mask, or all nodes.
    #[inline]
    pub fn quadrature_node(&self, flat: usize) -> bool {
        match &self.mask {
            Some(m) => m.inside()[flat],
            None => true,
        }
    }

    /// `∫ u v dx` with the node-weighted rule.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        let s = reduce_sum(self.values.len(), |i| {
            if self.quadrature_node(i) {
                self.values[i] * other.values[i]
            } else {
                0.0
            }
        });
        Ok(s * self.grid.cell_volume())
    }

    /// Bounding box of nodes with `|u| > rel · max|u|`, padded by one cell
    /// and clipped to the grid.
    pub fn support_box(&self, rel: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let thr = rel * self.max_abs();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        self.grid.for_each_node(|flat, x| {
            if self.values[flat].abs() > thr {
                for k in 0..n {
                    lo[k] = lo[k].min(x[k]);
                    hi[k] = hi[k].max(x[k]);
                }
            }
        });
        let (glo, ghi) = self.grid.bounds();
        if lo[0] > hi[0] {
            return (glo, ghi);
        }
        for k in 0..n {
            let h = self.grid.spacing()[k];
            lo[k] = (lo[k] - h).max(glo[k]);
            hi[k] = (hi[k] + h).min(ghi[k]);
        }
        (lo, hi)
    }
}
