use nalgebra::{DMatrix, DVector};

use super::linalg::orthonormal_complement_basis;
use super::check_dim;
use crate::config::{TOL_ORTHO, TOL_RANK};
use crate::error::{Error, Result};

/// A linear subspace of `ambient_dim`-space stored by an orthonormal basis
/// (the columns of `basis`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self { basis: DMatrix::zeros(ambient_dim, 0) }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self { basis: DMatrix::identity(ambient_dim, ambient_dim) }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Self {
        let cols: Vec<DVector<f64>> = axes.iter().map(|&i| super::unit(ambient_dim, i)).collect();
        Self::from_columns_unchecked(ambient_dim, cols)
    }

    /// Wraps columns already known to be orthonormal.
    pub(crate) fn from_columns_unchecked(ambient_dim: usize, cols: Vec<DVector<f64>>) -> Self {
        if cols.is_empty() {
            Self::zero(ambient_dim)
        } else {
            Self { basis: DMatrix::from_columns(&cols) }
        }
    }

    pub(crate) fn from_orthonormal_matrix(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// Orthonormalizes `vectors` by modified Gram-Schmidt with one
    /// re-orthogonalization pass. A vector whose residual falls below
    /// `TOL_RANK * max(|v|, 1)` is dropped.
    pub fn orthonormalize(ambient_dim: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        Self::orthonormalize_with(ambient_dim, vectors, TOL_RANK)
    }

    pub fn orthonormalize_with(ambient_dim: usize, vectors: &[DVector<f64>], tol: f64) -> Result<Self> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            check_dim(ambient_dim, v.len())?;
            if basis.len() == ambient_dim {
                continue;
            }
            let mut w = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let n = w.norm();
            if n > tol * v.norm().max(1.0) {
                basis.push(w / n);
            }
        }
        Ok(Self::from_columns_unchecked(ambient_dim, basis))
    }

    /// Orthonormal span of the columns of `m`.
    pub fn from_matrix_columns(m: &DMatrix<f64>) -> Result<Self> {
        let cols: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
        Self::orthonormalize(m.nrows(), &cols)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim()
    }

    /// Basis vectors as the columns of a matrix.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.ambient_dim(), v.len())?;
        Ok(self.project_unchecked(v))
    }

    pub(crate) fn project_unchecked(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.dim() == 0 {
            return DVector::zeros(v.len());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Coordinates of the projection of `v` in this subspace's basis.
    pub fn coordinates(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.ambient_dim(), v.len())?;
        Ok(self.basis.transpose() * v)
    }

    /// Ambient vector with the given coordinates in this subspace's basis.
    pub fn embed(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), coords.len())?;
        if self.dim() == 0 {
            return Ok(DVector::zeros(self.ambient_dim()));
        }
        Ok(&self.basis * coords)
    }

    pub fn complement(&self) -> Self {
        Self { basis: orthonormal_complement_basis(&self.basis, 1e-6) }
    }

    /// Orthonormal basis of the sum of the given subspaces.
    pub fn span_of(ambient_dim: usize, subspaces: &[Subspace]) -> Result<Self> {
        let mut vectors = Vec::new();
        for s in subspaces {
            check_dim(ambient_dim, s.ambient_dim())?;
            vectors.extend(s.basis_vectors());
        }
        Self::orthonormalize(ambient_dim, &vectors)
    }

    /// Intersection, computed as the complement of the span of complements.
    /// The empty intersection is the full space.
    pub fn intersect(ambient_dim: usize, subspaces: &[Subspace]) -> Result<Self> {
        let complements: Vec<Subspace> = subspaces
            .iter()
            .map(|s| {
                check_dim(ambient_dim, s.ambient_dim())?;
                Ok(s.complement())
            })
            .collect::<Result<_>>()?;
        Ok(Self::span_of(ambient_dim, &complements)?.complement())
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project_unchecked(v)).norm()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        v.len() == self.ambient_dim() && self.residual(v) <= tol
    }

    /// Largest residual of `other`'s basis vectors with respect to `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        other.basis.column_iter().map(|c| self.residual(&c.into_owned())).fold(0.0, f64::max)
    }

    /// True if `self ⊆ other` within `tol`.
    pub fn is_subspace_of(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient_dim() == other.ambient_dim() && other.containment_residual(self) <= tol
    }

    /// Spectral norm of `P_self · P_other`; zero iff the subspaces are orthogonal.
    pub fn overlap(&self, other: &Subspace) -> f64 {
        if self.dim() == 0 || other.dim() == 0 {
            return 0.0;
        }
        let c = self.basis.transpose() * &other.basis;
        c.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Frobenius distance between the two projectors.
    pub fn projector_distance(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && self.dim() == other.dim()
            && self.projector_distance(other) <= tol
    }

    /// Largest entry of `BᵀB - I`.
    pub fn gram_error(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        let k = g.nrows();
        (g - DMatrix::identity(k, k)).amax()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.gram_error() <= TOL_ORTHO
    }

    /// Image under a linear map (not necessarily orthogonal).
    pub fn map(&self, m: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.ambient_dim(), m.ncols())?;
        Self::from_matrix_columns(&(m * &self.basis))
    }

    /// Image under an orthogonal map, keeping the dimension.
    pub fn rotate(&self, q: &DMatrix<f64>) -> Result<Self> {
        let s = self.map(q)?;
        if s.dim() != self.dim() {
            return Err(Error::Numerical("rotation lost rank".into()));
        }
        Ok(s)
    }
}
