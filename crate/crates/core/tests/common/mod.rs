#![allow(dead_code)]

use affine_sobolev::field::{GridSpec, ScalarField};
use affine_sobolev::linalg::Mat;

/// `[−l, l]^n` at spacing `h`, with a node at the origin.
pub fn centred_grid(n: usize, l: f64, h: f64) -> GridSpec {
    GridSpec::covering(&vec![-l; n], &vec![l; n], h).unwrap()
}

/// `exp(−½ xᵀ M x)`.
pub fn gaussian(grid: &GridSpec, m: &Mat) -> ScalarField {
    let n = grid.dim();
    ScalarField::from_fn(grid.clone(), |x| {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] * m[(i, j)] * x[j];
            }
        }
        (-0.5 * q).exp()
    })
    .unwrap()
}

/// `exp(−|x|²/2)`.
pub fn radial_gaussian(grid: &GridSpec) -> ScalarField {
    gaussian(grid, &Mat::identity(grid.dim()))
}

/// `(1 − |x − c|²/r²)₊³`.
pub fn bump(x: &[f64], c: &[f64], r: f64) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (r * r);
    if r2 < 1.0 {
        (1.0 - r2).powi(3)
    } else {
        0.0
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn frob_rel(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).frobenius() / b.frobenius()
}
