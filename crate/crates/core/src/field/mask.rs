use super::grid::GridSpec;
use super::region::Region;
use crate::error::{Error, Result};

/// Rasterized domain on a grid.
///
/// A node is *inside* when its coordinates pass the membership test. An
/// inside node is *free* (an unknown) when it is not on the outer face of
/// the grid and all of its 2N axis neighbours are inside as well; the
/// remaining inside nodes form the boundary, where fields are pinned to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: GridSpec,
    inside: Vec<bool>,
    free: Vec<bool>,
}

impl DomainMask {
    pub fn new(grid: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "mask has {} flags for a grid of {} nodes",
                inside.len(),
                grid.len()
            )));
        }
        let free = Self::free_nodes(&grid, &inside);
        let n_free = free.iter().filter(|&&f| f).count();
        if n_free == 0 {
            return Err(Error::InvalidGrid("mask has no interior node".into()));
        }
        Ok(DomainMask { grid, inside, free })
    }

    pub fn from_region<R: Region + ?Sized>(grid: GridSpec, region: &R) -> Result<Self> {
        let mut inside = vec![false; grid.len()];
        grid.for_each_node(|flat, x| inside[flat] = region.contains(x));
        Self::new(grid, inside)
    }

    /// Every node of the grid; the outer face becomes the boundary.
    pub fn full(grid: GridSpec) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![true; n])
    }

    fn free_nodes(grid: &GridSpec, inside: &[bool]) -> Vec<bool> {
        let strides = grid.strides();
        (0..grid.len())
            .map(|flat| {
                if !inside[flat] {
                    return false;
                }
                (0..grid.dim()).all(|k| {
                    let i = grid.axis_index(flat, k, strides[k]);
                    i > 0
                        && i + 1 < grid.shape()[k]
                        && inside[flat - strides[k]]
                        && inside[flat + strides[k]]
                })
            })
            .collect()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    #[inline]
    pub fn is_free(&self, flat: usize) -> bool {
        self.free[flat]
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.inside[flat] && !self.free[flat]
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn boundary_count(&self) -> usize {
        (0..self.inside.len()).filter(|&i| self.is_boundary(i)).count()
    }

    /// Node-count volume of the inside set.
    pub fn volume(&self) -> f64 {
        self.inside.iter().filter(|&&f| f).count() as f64 * self.grid.cell_volume()
    }

    /// Membership by nearest node; points off the grid are outside.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.grid.nearest_node(x).is_some_and(|i| self.inside[i])
    }
}

impl Region for DomainMask {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.contains_point(x)
    }
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let h = self.grid.spacing().to_vec();
        self.grid.for_each_node(|flat, x| {
            if self.inside[flat] {
                for k in 0..n {
                    lo[k] = lo[k].min(x[k] - 0.5 * h[k]);
                    hi[k] = hi[k].max(x[k] + 0.5 * h[k]);
                }
            }
        });
        Some((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::region::{AxisBox, Ball};

    #[test]
    fn unit_box_boundary_is_outer_face() {
        let g = GridSpec::cube(2, 5, 0.0, 1.0).unwrap();
        let m = DomainMask::from_region(g, &AxisBox { lo: vec![0.0; 2], hi: vec![1.0; 2] }).unwrap();
        assert_eq!(m.free_count(), 9);
        assert_eq!(m.boundary_count(), 16);
    }

    #[test]
    fn empty_interior_is_rejected() {
        let g = GridSpec::cube(2, 5, 0.0, 1.0).unwrap();
        let r = Ball { center: vec![0.5, 0.5], radius: 0.01 };
        assert!(DomainMask::from_region(g, &r).is_err());
    }

    #[test]
    fn ball_mask_has_boundary_ring() {
        let g = GridSpec::cube(2, 41, -1.0, 1.0).unwrap();
        let m = DomainMask::from_region(g, &Ball { center: vec![0.0, 0.0], radius: 0.8 }).unwrap();
        assert!(m.boundary_count() > 0);
        assert!(m.free_count() > 0);
        assert!(m.contains_point(&[0.0, 0.0]));
        assert!(!m.contains_point(&[0.9, 0.9]));
    }
}
