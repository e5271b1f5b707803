//! Dense linear algebra for subspaces, projections, ranks and lattices.

pub(crate) mod lattice;
mod linalg;
mod subspace;

pub use lattice::{lll_reduce, reduce_generators, GeneratorReduction, Lattice, ReducedBasis};
pub use linalg::{
    column_space, integer_rank, kernel, numerical_rank, orthonormal_complement_basis, singular_values,
    RankTolerance,
};
pub use subspace::Subspace;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Unit vector `e_i` of `dim`-space.
pub fn unit(dim: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    v[i] = 1.0;
    v
}

/// Reflection of `v` across the hyperplane orthogonal to the unit vector `n`.
pub fn reflect(v: &DVector<f64>, n: &DVector<f64>) -> DVector<f64> {
    v - n * (2.0 * v.dot(n))
}
