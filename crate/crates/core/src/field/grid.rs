use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Largest supported dimension unless a caller raises the cap.
pub const DEFAULT_MAX_DIM: usize = 4;
/// Default cap on the number of nodes in one grid (512 MiB of `f64`).
pub const DEFAULT_MAX_NODES: usize = 1 << 26;

/// Caps applied when validating a [`GridSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLimits {
    pub max_dim: usize,
    pub max_nodes: usize,
}

impl Default for GridLimits {
    fn default() -> Self {
        GridLimits { max_dim: DEFAULT_MAX_DIM, max_nodes: DEFAULT_MAX_NODES }
    }
}

/// Uniform tensor grid with node-centred samples.
///
/// Nodes are stored row-major: the last axis varies fastest. Node
/// `(i_1, …, i_N)` sits at `origin_k + i_k · spacing_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
}

impl GridSpec {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        Self::with_limits(shape, spacing, origin, GridLimits::default())
    }

    pub fn with_limits(
        shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        limits: GridLimits,
    ) -> Result<Self> {
        let n = shape.len();
        if n < 2 || n > limits.max_dim {
            return Err(Error::InvalidGrid(format!(
                "dimension {n} outside the supported range 2..={}",
                limits.max_dim
            )));
        }
        if spacing.len() != n || origin.len() != n {
            return Err(Error::InvalidGrid("shape, spacing and origin lengths differ".into()));
        }
        for (axis, &s) in shape.iter().enumerate() {
            if s < 3 {
                return Err(Error::DegenerateGrid { axis, nodes: s });
            }
        }
        if spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidGrid("spacings must be finite and positive".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let total = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        match total {
            Some(t) if t <= limits.max_nodes => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "node count exceeds the cap of {}",
                    limits.max_nodes
                )))
            }
        }
        Ok(GridSpec { shape, spacing, origin })
    }

    /// Grid with `nodes` nodes per axis spanning `[lo, hi]` on every axis.
    pub fn cube(dim: usize, nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::DegenerateGrid { axis: 0, nodes });
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        Self::new(vec![nodes; dim], vec![h; dim], vec![lo; dim])
    }

    /// Grid covering the box `[lo, hi]` with spacing as close to `h` as
    /// possible while landing exactly on both ends.
    pub fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let mut shape = Vec::with_capacity(lo.len());
        let mut spacing = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            let cells = ((b - a) / h).round().max(2.0) as usize;
            shape.push(cells + 1);
            spacing.push((b - a) / cells as f64);
        }
        Self::new(shape, spacing, lo.to_vec())
    }

    /// Grid with per-axis spacing chosen so that `u ∘ map` stays as well
    /// resolved as `u` is at `base_spacing`, covering the preimage of the
    /// support box `[lo, hi]`.
    ///
    /// The image `x ↦ T x + y` of a target node lands in the source; along
    /// axis `k` the composed field varies `‖T e_k‖` times faster, so the
    /// spacing there is `base_spacing / ‖T e_k‖`. If the node count would
    /// exceed `max_nodes`, all spacings grow by a common factor.
    pub fn fitted(
        lo: &[f64],
        hi: &[f64],
        matrix: &Mat,
        translation: &[f64],
        base_spacing: f64,
        max_nodes: usize,
    ) -> Result<Self> {
        let n = lo.len();
        let inv = matrix.inverse()?;
        let mut blo = vec![f64::INFINITY; n];
        let mut bhi = vec![f64::NEG_INFINITY; n];
        for corner in 0..(1usize << n) {
            let c: Vec<f64> = (0..n)
                .map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] } - translation[k])
                .collect();
            let p = inv.mul_vec(&c);
            for k in 0..n {
                blo[k] = blo[k].min(p[k]);
                bhi[k] = bhi[k].max(p[k]);
            }
        }
        let mut spacing: Vec<f64> = (0..n)
            .map(|k| {
                let col_norm = matrix.col(k).iter().map(|v| v * v).sum::<f64>().sqrt();
                base_spacing / col_norm.max(1e-12)
            })
            .collect();
        let count = |sp: &[f64]| -> f64 {
            (0..n).map(|k| ((bhi[k] - blo[k]) / sp[k]).ceil() + 1.0).product()
        };
        let total = count(&spacing);
        if total > max_nodes as f64 {
            let grow = (total / max_nodes as f64).powf(1.0 / n as f64) * 1.01;
            for s in &mut spacing {
                *s *= grow;
            }
        }
        let shape: Vec<usize> = (0..n)
            .map(|k| (((bhi[k] - blo[k]) / spacing[k]).ceil() as usize + 1).max(3))
            .collect();
        // centre the node lattice on the bounding box
        let origin: Vec<f64> = (0..n)
            .map(|k| {
                let span = (shape[k] - 1) as f64 * spacing[k];
                0.5 * (blo[k] + bhi[k]) - 0.5 * span
            })
            .collect();
        Self::new(shape, spacing, origin)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume weight of one node, `∏ h_k`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1usize; n];
        for k in (0..n - 1).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    /// Lower and upper corner of the grid box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = (0..self.dim())
            .map(|k| self.origin[k] + (self.shape[k] - 1) as f64 * self.spacing[k])
            .collect();
        (self.origin.clone(), hi)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rem = flat;
        for k in (0..self.dim()).rev() {
            idx[k] = rem % self.shape[k];
            rem /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Index along `axis` of the node with flat index `flat`.
    #[inline]
    pub fn axis_index(&self, flat: usize, axis: usize, stride: usize) -> usize {
        (flat / stride) % self.shape[axis]
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        self.coords_of(&idx)
    }

    pub fn coords_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + i as f64 * self.spacing[k])
            .collect()
    }

    /// Writes node coordinates for every flat index into `f`, in order.
    pub fn for_each_node<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let mut x = self.origin.clone();
        for flat in 0..self.len() {
            f(flat, &x);
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < self.shape[k] {
                    x[k] = self.origin[k] + idx[k] as f64 * self.spacing[k];
                    break;
                }
                idx[k] = 0;
                x[k] = self.origin[k];
            }
        }
    }

    /// True when the node lies on the outer face of the grid along any axis.
    pub fn on_grid_edge(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.shape)
            .any(|(&i, &s)| i == 0 || i + 1 == s)
    }

    /// Index of the node nearest to `x`, or `None` outside the grid box
    /// (with half a cell of slack).
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for k in 0..self.dim() {
            let t = (x[k] - self.origin[k]) / self.spacing[k];
            let i = t.round();
            if i < 0.0 || i > (self.shape[k] - 1) as f64 {
                return None;
            }
            flat = flat * self.shape[k] + i as usize;
        }
        Some(flat)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.shape == other.shape
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs())
            && self
                .origin
                .iter()
                .zip(&other.origin)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}
