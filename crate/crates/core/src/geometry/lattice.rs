use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::linalg::{numerical_rank, RankTolerance};
use crate::error::{Error, Result};

const LLL_DELTA: f64 = 0.99;

/// A full-rank lattice in `d`-space, stored by an arbitrary generating basis
/// (columns). An LLL-reduced basis is computed on first use and cached.
#[derive(Debug, Clone)]
pub struct Lattice {
    basis: DMatrix<f64>,
    inverse: DMatrix<f64>,
    reduced: OnceLock<ReducedBasis>,
}

/// LLL-reduced basis with `basis = original · transform`, `transform` unimodular.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub basis: DMatrix<f64>,
    pub transform: DMatrix<i64>,
}

impl Lattice {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != basis.ncols() || basis.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "lattice basis must be square and non-empty, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("lattice basis has non-finite entries".into()));
        }
        let det = basis.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidInput(format!("lattice basis is singular (|det| = {:e})", det.abs())));
        }
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("lattice basis inversion failed".into()))?;
        Ok(Self { basis, inverse, reduced: OnceLock::new() })
    }

    /// The integer lattice `Z^d`.
    pub fn integer(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn determinant(&self) -> f64 {
        self.basis.determinant()
    }

    /// Coordinates of `x` with respect to the stored basis.
    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.inverse * x
    }

    pub fn point(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.basis * coords
    }

    pub fn lattice_point(&self, coeffs: &[i64]) -> DVector<f64> {
        let c = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&k| k as f64));
        &self.basis * c
    }

    /// Representative of `x` in the fundamental parallelepiped together with
    /// the lattice coefficients removed: `x = wrapped + B · shift`.
    pub fn wrap(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<i64>) {
        let f = self.coords(x);
        let shift: Vec<i64> = f.iter().map(|c| c.floor() as i64).collect();
        if shift.iter().all(|&s| s == 0) {
            return (x.clone(), shift);
        }
        (x - self.lattice_point(&shift), shift)
    }

    pub fn reduced(&self) -> &ReducedBasis {
        self.reduced.get_or_init(|| {
            let (basis, transform) = lll_reduce(&self.basis);
            ReducedBasis { basis, transform }
        })
    }

    /// Upper bound on the diameter of a fundamental domain (sum of the
    /// reduced basis lengths).
    pub fn diameter_bound(&self) -> f64 {
        self.reduced().basis.column_iter().map(|c| c.norm()).sum()
    }
}

/// LLL reduction (δ = 0.99) of linearly independent columns. Returns the
/// reduced columns and the integer transform `T` with `reduced = input · T`.
pub fn lll_reduce(input: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<i64>) {
    let n = input.ncols();
    let mut b: Vec<DVector<f64>> = input.column_iter().map(|c| c.into_owned()).collect();
    let mut t: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    if n > 1 {
        let (mut mu, mut bn) = gram_schmidt(&b);
        let mut k = 1;
        let mut guard = 0usize;
        while k < n {
            guard += 1;
            if guard > 100_000 {
                break;
            }
            for j in (0..k).rev() {
                let q = mu[k][j].round();
                if q != 0.0 {
                    let bj = b[j].clone();
                    b[k].axpy(-q, &bj, 1.0);
                    let qi = q as i64;
                    let tj = t[j].clone();
                    for (x, y) in t[k].iter_mut().zip(tj) {
                        *x -= qi * y;
                    }
                    for l in 0..j {
                        mu[k][l] -= q * mu[j][l];
                    }
                    mu[k][j] -= q;
                }
            }
            if bn[k] >= (LLL_DELTA - mu[k][k - 1] * mu[k][k - 1]) * bn[k - 1] {
                k += 1;
            } else {
                b.swap(k, k - 1);
                t.swap(k, k - 1);
                (mu, bn) = gram_schmidt(&b);
                k = (k - 1).max(1);
            }
        }
    }
    let basis = if n == 0 { DMatrix::zeros(input.nrows(), 0) } else { DMatrix::from_columns(&b) };
    let transform = DMatrix::from_fn(n, n, |i, j| t[j][i]);
    (basis, transform)
}

fn gram_schmidt(b: &[DVector<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = b.len();
    let mut star: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0; n]; n];
    let mut bn = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = if bn[j] > 0.0 { b[i].dot(&star[j]) / bn[j] } else { 0.0 };
            v.axpy(-mu[i][j], &star[j], 1.0);
        }
        bn[i] = v.norm_squared();
        star.push(v);
    }
    (mu, bn)
}

/// Basis of the discrete group generated by a finite set of vectors.
#[derive(Debug, Clone)]
pub struct GeneratorReduction {
    /// Reduced basis vectors (columns), `basis = generators · coeffs`.
    pub basis: DMatrix<f64>,
    /// Integer combinations of the generators producing `basis` (n × r).
    pub coeffs: DMatrix<i64>,
    /// Integer relations among the generators (n × (n - r)).
    pub relations: DMatrix<i64>,
}

/// Extracts a lattice basis from a generating set (columns of `gens`) that is
/// known to generate a discrete group. Integer relations are found by LLL on
/// the weighted embedding `(w·g_k, e_k)`; the remaining vectors generate the
/// same group and are reduced once more.
pub fn reduce_generators(gens: &DMatrix<f64>) -> Result<GeneratorReduction> {
    let dim = gens.nrows();
    let n = gens.ncols();
    let rank = numerical_rank(gens, RankTolerance::EXACT);
    if n == 0 || rank == 0 {
        return Ok(GeneratorReduction {
            basis: DMatrix::zeros(dim, 0),
            coeffs: DMatrix::zeros(n, 0),
            relations: DMatrix::identity(n, n).map(|x: f64| x as i64),
        });
    }
    let scale = gens.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let weight = 1e6 / scale;
    let mut aug = DMatrix::zeros(dim + n, n);
    for k in 0..n {
        for i in 0..dim {
            aug[(i, k)] = weight * gens[(i, k)];
        }
        aug[(dim + k, k)] = 1.0;
    }
    let (_, transform) = lll_reduce(&aug);
    let mut relations = Vec::new();
    let mut kept = Vec::new();
    for j in 0..n {
        let u: Vec<i64> = transform.column(j).iter().copied().collect();
        let v = combine(gens, &u);
        let l1: f64 = u.iter().map(|x| x.unsigned_abs() as f64).sum();
        if v.norm() <= 1e-8 * scale * l1.max(1.0) {
            relations.push(u);
        } else {
            kept.push((u, v));
        }
    }
    if kept.len() != rank {
        return Err(Error::Numerical(format!(
            "generator reduction found {} independent vectors, expected rank {rank}",
            kept.len()
        )));
    }
    let kept_basis = DMatrix::from_columns(&kept.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
    let (basis, t2) = lll_reduce(&kept_basis);
    let kept_coeffs = DMatrix::from_fn(n, rank, |i, j| kept[j].0[i]);
    let coeffs = &kept_coeffs * &t2;
    let relations = if relations.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_fn(n, relations.len(), |i, j| relations[j][i])
    };
    Ok(GeneratorReduction { basis, coeffs, relations })
}

fn combine(gens: &DMatrix<f64>, u: &[i64]) -> DVector<f64> {
    let mut v = DVector::zeros(gens.nrows());
    for (k, &c) in u.iter().enumerate() {
        if c != 0 {
            v.axpy(c as f64, &gens.column(k), 1.0);
        }
    }
    v
}

/// Rounds `x` to integers when every entry is within `tol` of one.
pub(crate) fn round_integral(x: &DVector<f64>, tol: f64) -> Option<Vec<i64>> {
    x.iter()
        .map(|&c| {
            let r = c.round();
            ((c - r).abs() <= tol).then_some(r as i64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn det_i64(m: &DMatrix<i64>) -> f64 {
        m.map(|x| x as f64).determinant()
    }

    #[test]
    fn lll_transform_is_unimodular_and_consistent() {
        let b = dmatrix![1.0, 0.0, 3.0; 0.0, 1.0, 5.0; 0.0, 0.0, 1.0].transpose();
        let (r, t) = lll_reduce(&b);
        assert!((det_i64(&t).abs() - 1.0).abs() < 1e-9);
        assert!((&b * t.map(|x| x as f64) - &r).norm() < 1e-12);
        // Z^3 in disguise reduces to unit vectors.
        for c in r.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_lands_in_fundamental_domain() {
        let l = Lattice::new(dmatrix![1.0, 0.5; 0.0, 1.0]).unwrap();
        let x = DVector::from_vec(vec![3.7, -2.2]);
        let (w, s) = l.wrap(&x);
        let f = l.coords(&w);
        assert!(f.iter().all(|&c| (0.0..1.0).contains(&c)));
        assert!((w + l.lattice_point(&s) - x).norm() < 1e-12);
    }

    #[test]
    fn singular_lattice_is_rejected() {
        assert!(Lattice::new(dmatrix![1.0, 2.0; 2.0, 4.0]).is_err());
    }

    #[test]
    fn projected_integer_lattice_basis() {
        // Project Z^3 onto the plane orthogonal to (1,1,1): a hexagonal lattice.
        let n = DVector::from_vec(vec![1.0, 1.0, 1.0]).normalize();
        let p = DMatrix::identity(3, 3) - &n * n.transpose();
        let red = reduce_generators(&p).unwrap();
        assert_eq!(red.basis.ncols(), 2);
        assert_eq!(red.relations.ncols(), 1);
        let rel: Vec<i64> = red.relations.column(0).iter().copied().collect();
        assert!(rel.iter().all(|&x| x.abs() == 1) && rel.iter().all(|&x| x == rel[0]));
        // Every projected generator is an integer combination of the basis.
        let gram = red.basis.transpose() * &red.basis;
        let ginv = gram.try_inverse().unwrap();
        for k in 0..3 {
            let c = &ginv * (red.basis.transpose() * p.column(k));
            assert!(round_integral(&c, 1e-9).is_some());
        }
        // Covolume of the projected lattice is 1/sqrt(3).
        let covol = (red.basis.transpose() * &red.basis).determinant().sqrt();
        assert!((covol - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }
}
