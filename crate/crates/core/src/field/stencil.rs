//! Finite-difference stencils and quadrature.
//!
//! Two families live here. `gradient` / `hessian` are the pointwise
//! derivative operators: second-order central differences inside the grid,
//! zero extension past the mask for masked fields and one-sided
//! second-order formulas at the outer face for unmasked fields.
//!
//! `gram_products` and [`EllipticStencil`] form the discrete Dirichlet
//! pair used by the energy: squared partials are taken on grid edges
//! (forward differences), mixed products from central differences. With that
//! choice `−½ ∂/∂u` of `Σ C_ij A_ij[u]` is exactly the operator
//! `Σ C_ij ∂_i∂_j` built from the three-point second difference and the
//! four-corner cross stencil, so the discrete energy and the discrete affine
//! Laplacian are a gradient pair.

use rayon::prelude::*;

use super::grid::GridSpec;
use super::scalar::ScalarField;
use super::{reduce_sum, REDUCE_CHUNK};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// N derivative components per node.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn at(&self, flat: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[flat]).collect()
    }
}

/// Symmetric N×N matrix per node, upper triangle stored.
#[derive(Clone, Debug)]
pub struct HessianField {
    pub grid: GridSpec,
    dim: usize,
    entries: Vec<Vec<f64>>,
}

impl HessianField {
    fn pair(dim: usize, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * dim - a * (a + 1) / 2 + b
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[Self::pair(self.dim, i, j)]
    }

    pub fn at(&self, flat: usize) -> Mat {
        let mut m = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self.entry(i, j)[flat];
            }
        }
        m
    }
}

fn check_shape(grid: &GridSpec) -> Result<()> {
    for (axis, &s) in grid.shape().iter().enumerate() {
        if s < 3 {
            return Err(Error::DegenerateGrid { axis, nodes: s });
        }
    }
    Ok(())
}

/// First derivative along `axis`.
pub(crate) fn diff1(grid: &GridSpec, v: &[f64], axis: usize, zero_ext: bool) -> Vec<f64> {
    let s = grid.stride(axis);
    let n = grid.shape()[axis];
    let h = grid.spacing()[axis];
    let inv2h = 0.5 / h;
    let mut out = vec![0.0; v.len()];
    out.par_chunks_mut(REDUCE_CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * REDUCE_CHUNK;
        for (o, slot) in chunk.iter_mut().enumerate() {
            let f = base + o;
            let i = (f / s) % n;
            *slot = if i > 0 && i + 1 < n {
                (v[f + s] - v[f - s]) * inv2h
            } else if zero_ext {
                if i == 0 {
                    v[f + s] * inv2h
                } else {
                    -v[f - s] * inv2h
                }
            } else if i == 0 {
                (-3.0 * v[f] + 4.0 * v[f + s] - v[f + 2 * s]) * inv2h
            } else {
                (3.0 * v[f] - 4.0 * v[f - s] + v[f - 2 * s]) * inv2h
            };
        }
    });
    out
}

/// Second derivative along `axis`.
pub(crate) fn diff2(grid: &GridSpec, v: &[f64], axis: usize, zero_ext: bool) -> Vec<f64> {
    let s = grid.stride(axis);
    let n = grid.shape()[axis];
    let h = grid.spacing()[axis];
    let ih2 = 1.0 / (h * h);
    let mut out = vec![0.0; v.len()];
    out.par_chunks_mut(REDUCE_CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * REDUCE_CHUNK;
        for (o, slot) in chunk.iter_mut().enumerate() {
            let f = base + o;
            let i = (f / s) % n;
            *slot = if i > 0 && i + 1 < n {
                (v[f + s] - 2.0 * v[f] + v[f - s]) * ih2
            } else if zero_ext {
                if i == 0 {
                    (v[f + s] - 2.0 * v[f]) * ih2
                } else {
                    (v[f - s] - 2.0 * v[f]) * ih2
                }
            } else if n >= 4 {
                if i == 0 {
                    (2.0 * v[f] - 5.0 * v[f + s] + 4.0 * v[f + 2 * s] - v[f + 3 * s]) * ih2
                } else {
                    (2.0 * v[f] - 5.0 * v[f - s] + 4.0 * v[f - 2 * s] - v[f - 3 * s]) * ih2
                }
            } else if i == 0 {
                (v[f] - 2.0 * v[f + s] + v[f + 2 * s]) * ih2
            } else {
                (v[f] - 2.0 * v[f - s] + v[f - 2 * s]) * ih2
            };
        }
    });
    out
}

/// Discrete ∇u, one vector per node.
pub fn gradient(u: &ScalarField) -> Result<VectorField> {
    check_shape(u.grid())?;
    let zero_ext = u.is_masked();
    let components = (0..u.dim()).map(|k| diff1(u.grid(), u.values(), k, zero_ext)).collect();
    Ok(VectorField { grid: u.grid().clone(), components })
}

/// Discrete Hessian u''. Mixed entries are `D_i(D_j u)`, which reduces to
/// the symmetric four-corner stencil away from the outer face.
pub fn hessian(u: &ScalarField) -> Result<HessianField> {
    check_shape(u.grid())?;
    let n = u.dim();
    let zero_ext = u.is_masked();
    let first: Vec<Vec<f64>> = (0..n).map(|k| diff1(u.grid(), u.values(), k, zero_ext)).collect();
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                entries.push(diff2(u.grid(), u.values(), i, zero_ext));
            } else {
                let a = diff1(u.grid(), &first[j], i, zero_ext);
                let b = diff1(u.grid(), &first[i], j, zero_ext);
                entries.push(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect());
            }
        }
    }
    Ok(HessianField { grid: u.grid().clone(), dim: n, entries })
}

/// `∫ u dx`, node weight `∏ h_k`, restricted to the mask when present.
pub fn integrate(u: &ScalarField) -> f64 {
    let v = u.values();
    reduce_sum(v.len(), |i| if u.quadrature_node(i) { v[i] } else { 0.0 }) * u.grid().cell_volume()
}

/// `(∫ |u|^p dx)^{1/p}` for `p ≥ 1`.
pub fn lp_norm(u: &ScalarField, p: f64) -> Result<f64> {
    Ok(lp_norm_pow(u, p)?.powf(1.0 / p))
}

/// `∫ |u|^p dx`.
pub fn lp_norm_pow(u: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
    }
    let v = u.values();
    let s = if p == 2.0 {
        reduce_sum(v.len(), |i| if u.quadrature_node(i) { v[i] * v[i] } else { 0.0 })
    } else {
        reduce_sum(v.len(), |i| if u.quadrature_node(i) { v[i].abs().powf(p) } else { 0.0 })
    };
    Ok(s * u.grid().cell_volume())
}

/// Discrete `∫ ∂_i u ∂_j u dx` from the Dirichlet pair described in the
/// module docs.
pub(crate) fn gram_products(u: &ScalarField) -> Mat {
    let grid = u.grid();
    let n = grid.dim();
    let v = u.values();
    let strides = grid.strides();
    let shape = grid.shape().to_vec();
    let h = grid.spacing().to_vec();
    let len = v.len();
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n * n];
            let mut central = vec![0.0; n];
            let mut interior = vec![false; n];
            for f in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(len) {
                for k in 0..n {
                    let s = strides[k];
                    let i = (f / s) % shape[k];
                    if i + 1 < shape[k] {
                        let d = (v[f + s] - v[f]) / h[k];
                        acc[k * n + k] += d * d;
                    }
                    interior[k] = i > 0 && i + 1 < shape[k];
                    central[k] = if interior[k] { (v[f + s] - v[f - s]) / (2.0 * h[k]) } else { 0.0 };
                }
                for a in 0..n {
                    if !interior[a] {
                        continue;
                    }
                    for b in (a + 1)..n {
                        if interior[b] {
                            acc[a * n + b] += central[a] * central[b];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let vol = grid.cell_volume();
    let mut m = Mat::zeros(n);
    for p in &partials {
        for a in 0..n {
            for b in a..n {
                m[(a, b)] += p[a * n + b];
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            m[(a, b)] *= vol;
            m[(b, a)] = m[(a, b)];
        }
    }
    m
}

/// `∫ ∇u ∇uᵀ dx` from the pointwise `gradient` operator.
pub(crate) fn pointwise_gram(u: &ScalarField) -> Result<Mat> {
    let g = gradient(u)?;
    let n = u.dim();
    let mut m = Mat::zeros(n);
    for a in 0..n {
        for b in a..n {
            let (ga, gb) = (&g.components[a], &g.components[b]);
            let s = reduce_sum(ga.len(), |i| if u.quadrature_node(i) { ga[i] * gb[i] } else { 0.0 });
            m[(a, b)] = s * u.grid().cell_volume();
            m[(b, a)] = m[(a, b)];
        }
    }
    Ok(m)
}

/// Constant-coefficient operator `L u = Σ_ij C_ij ∂_i∂_j u` on the free nodes
/// of a mask, with zero Dirichlet data.
///
/// Diagonal terms use the three-point second difference, cross terms the
/// four-corner stencil; the assembled operator is symmetric on zero-boundary
/// fields.
#[derive(Clone, Debug)]
pub struct EllipticStencil {
    pub coefficients: Mat,
    /// `(flat offset, weight)` per neighbour, centre first.
    pub taps: Vec<(isize, f64)>,
    /// Multi-index offset of each tap, for dumps.
    pub offsets: Vec<Vec<i32>>,
}

impl EllipticStencil {
    pub fn new(grid: &GridSpec, coefficients: &Mat) -> Result<Self> {
        let n = grid.dim();
        if coefficients.dim() != n {
            return Err(Error::InvalidArgument("coefficient matrix size differs from grid dimension".into()));
        }
        let c = coefficients.symmetrized();
        let strides = grid.strides();
        let h = grid.spacing();
        let mut table: Vec<(Vec<i32>, f64)> = Vec::new();
        let mut add = |off: Vec<i32>, w: f64| {
            if let Some(e) = table.iter_mut().find(|e| e.0 == off) {
                e.1 += w;
            } else {
                table.push((off, w));
            }
        };
        add(vec![0; n], 0.0);
        for i in 0..n {
            let w = c[(i, i)] / (h[i] * h[i]);
            let mut p = vec![0; n];
            p[i] = 1;
            let mut m = vec![0; n];
            m[i] = -1;
            add(p, w);
            add(m, w);
            add(vec![0; n], -2.0 * w);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // C_ij + C_ji over 4 h_i h_j
                let w = 2.0 * c[(i, j)] / (4.0 * h[i] * h[j]);
                if w == 0.0 {
                    continue;
                }
                for (si, sj, sign) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                    let mut o = vec![0; n];
                    o[i] = si;
                    o[j] = sj;
                    add(o, sign * w);
                }
            }
        }
        let taps = table
            .iter()
            .map(|(o, w)| {
                let off: isize = o.iter().zip(&strides).map(|(&d, &s)| d as isize * s as isize).sum();
                (off, *w)
            })
            .collect();
        let offsets = table.into_iter().map(|(o, _)| o).collect();
        Ok(EllipticStencil { coefficients: c, taps, offsets })
    }

    /// Applies the stencil at every free node; other nodes get 0.
    pub fn apply(&self, free: &[bool], u: &[f64], out: &mut [f64]) {
        out.par_chunks_mut(REDUCE_CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * REDUCE_CHUNK;
            for (o, slot) in chunk.iter_mut().enumerate() {
                let f = base + o;
                *slot = if free[f] {
                    self.taps.iter().map(|&(off, w)| w * u[(f as isize + off) as usize]).sum()
                } else {
                    0.0
                };
            }
        });
    }

    /// One line per tap: offset vector and weight.
    pub fn dump(&self) -> String {
        let mut s = String::from("offset,weight\n");
        for (o, (_, w)) in self.offsets.iter().zip(&self.taps) {
            let o: Vec<String> = o.iter().map(|d| d.to_string()).collect();
            s.push_str(&format!("\"{}\",{:.17e}\n", o.join(" "), w));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize, lo: f64, hi: f64) -> GridSpec {
        GridSpec::cube(2, n, lo, hi).unwrap()
    }

    #[test]
    fn zero_field_has_zero_derivatives() {
        let u = ScalarField::zeros(grid2(9, 0.0, 1.0));
        let g = gradient(&u).unwrap();
        assert!(g.components.iter().flatten().all(|&v| v == 0.0));
        let hs = hessian(&u).unwrap();
        assert!((0..u.grid().len()).all(|i| hs.at(i).max_abs() == 0.0));
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let u = ScalarField::from_fn(grid2(11, -1.0, 1.0), |x| x[0]).unwrap();
        let g = gradient(&u).unwrap();
        for i in 0..u.grid().len() {
            assert!((g.components[0][i] - 1.0).abs() < 1e-12);
            assert!(g.components[1][i].abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_of_product_is_exact() {
        let u = ScalarField::from_fn(grid2(9, -1.0, 1.0), |x| x[0] * x[1]).unwrap();
        let hs = hessian(&u).unwrap();
        for i in 0..u.grid().len() {
            let m = hs.at(i);
            assert!(m[(0, 0)].abs() < 1e-10 && m[(1, 1)].abs() < 1e-10);
            assert!((m[(0, 1)] - 1.0).abs() < 1e-10 && (m[(1, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_of_linear_is_zero() {
        let u = ScalarField::from_fn(grid2(7, 0.0, 3.0), |x| 2.0 * x[0] - x[1] + 4.0).unwrap();
        let hs = hessian(&u).unwrap();
        assert!((0..u.grid().len()).all(|i| hs.at(i).max_abs() < 1e-10));
    }

    #[test]
    fn lp_norm_rejects_small_exponent() {
        let u = ScalarField::zeros(grid2(5, 0.0, 1.0));
        assert!(lp_norm(&u, 0.5).is_err());
        assert_eq!(lp_norm(&u, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_box_integral_of_one() {
        let n = 65;
        let u = ScalarField::from_fn(grid2(n, 0.0, 1.0), |_| 1.0).unwrap();
        let h = 1.0 / (n - 1) as f64;
        // node sum over-counts the faces by O(h)
        let v = integrate(&u);
        assert!((v - 1.0).abs() <= 2.0 * h + h * h + 1e-12, "{v}");
    }

    #[test]
    fn stencil_for_identity_is_five_point() {
        let g = grid2(5, 0.0, 1.0);
        let s = EllipticStencil::new(&g, &Mat::identity(2)).unwrap();
        let nonzero: Vec<_> = s.taps.iter().filter(|t| t.1 != 0.0).collect();
        assert_eq!(nonzero.len(), 5);
    }
}
