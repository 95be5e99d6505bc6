//! Affine-invariant Sobolev energies on grids: the Gram matrix of a field,
//! the affine energy and its Laplacian, variational solvers built on them and
//! profile extraction for bounded sequences.

pub mod energy;
pub mod error;
pub mod field;
pub mod linalg;
pub mod operator;
pub mod profiles;
pub mod solvers;

pub use error::{Error, Result};
pub use field::{DomainMask, GridSpec, ScalarField, UnimodularTransform};
pub use linalg::Mat;
