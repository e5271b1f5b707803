use nalgebra::{DMatrix, DVector};

use crate::config::{FD_SV_ABS_FLOOR, FD_SV_REL_TOL, SV_REL_TOL};

/// Cutoff for treating singular values as zero: `s` counts iff
/// `s >= rel * s_max` and `s >= abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl RankTolerance {
    /// Cutoff for matrices computed in closed form.
    pub const EXACT: RankTolerance = RankTolerance { rel: SV_REL_TOL, abs: 1e-13 };
    /// Cutoff for finite-difference matrices.
    pub const FD: RankTolerance = RankTolerance { rel: FD_SV_REL_TOL, abs: FD_SV_ABS_FLOOR };

    pub fn threshold(&self, s_max: f64) -> f64 {
        (self.rel * s_max).max(self.abs)
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: RankTolerance) -> usize {
    let s = singular_values(m);
    let Some(&s_max) = s.first() else { return 0 };
    // Singular values alone are accurate; only the vectors need Jacobi.
    let cut = tol.threshold(s_max);
    s.iter().filter(|&&x| x >= cut).count()
}

/// One-sided Jacobi rotation of the columns of `m` until they are mutually
/// orthogonal. The resulting non-zero columns are `σ_i u_i`, accurate even
/// for nearly singular inputs.
fn jacobi_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = m.clone();
    let n = a.ncols();
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..a.nrows() {
                    let (ap, aq) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    a
}

/// Orthonormal basis (columns) of the column space of `m`, ordered by
/// decreasing singular value.
pub fn column_space(m: &DMatrix<f64>, tol: RankTolerance) -> DMatrix<f64> {
    let d = m.nrows();
    if d == 0 || m.ncols() == 0 {
        return DMatrix::zeros(d, 0);
    }
    let a = jacobi_columns(m);
    let mut picked: Vec<(f64, DVector<f64>)> = a.column_iter().map(|c| (c.norm(), c.into_owned())).collect();
    let s_max = picked.iter().map(|p| p.0).fold(0.0, f64::max);
    let cut = tol.threshold(s_max);
    picked.retain(|p| p.0 >= cut && p.0 > 0.0);
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(picked.len());
    for (_, mut c) in picked {
        for _ in 0..2 {
            for b in &cols {
                let k = b.dot(&c);
                c.axpy(-k, b, 1.0);
            }
        }
        let n = c.norm();
        if n > 0.0 {
            cols.push(c / n);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis (columns) of the null space of `m`.
pub fn kernel(m: &DMatrix<f64>, tol: RankTolerance) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let row_space = column_space(&m.transpose(), tol);
    orthonormal_complement_basis(&row_space, 1e-8)
}

/// Orthonormal basis of the orthogonal complement of the span of the given
/// orthonormal columns. Standard basis vectors are projected out greedily,
/// always taking the one with the largest residual, so every accepted
/// residual is at least `sqrt(remaining / d)`.
pub fn orthonormal_complement_basis(q: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let d = q.nrows();
    let mut basis: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    let mut used = vec![false; d];
    while basis.len() < d {
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for i in (0..d).filter(|&i| !used[i]) {
            let mut w = super::unit(d, i);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let n = w.norm();
            if best.as_ref().is_none_or(|(bn, _, _)| n > *bn) {
                best = Some((n, i, w));
            }
        }
        let Some((n, i, w)) = best else { break };
        if n <= tol {
            break;
        }
        used[i] = true;
        basis.push(w / n);
    }
    let extra: Vec<DVector<f64>> = basis.split_off(start);
    if extra.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&extra)
    }
}

/// Exact rank of an integer matrix via fraction-free elimination.
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][col] != 0) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && m[r][col] != 0 {
                let a = m[rank][col];
                let b = m[r][col];
                let g = gcd(a, b);
                let (fa, fb) = (b / g, a / g);
                for c in 0..ncols {
                    m[r][c] = m[r][c] * fb - m[rank][c] * fa;
                }
                let row_gcd = m[r].iter().fold(0i128, |acc, &x| gcd(acc, x));
                if row_gcd > 1 {
                    for x in m[r].iter_mut() {
                        *x /= row_gcd;
                    }
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_rank_detects_dependence() {
        assert_eq!(integer_rank(&[vec![1, 2, 3], vec![2, 4, 6]]), 1);
        assert_eq!(integer_rank(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0]]), 2);
        assert_eq!(integer_rank(&[vec![3, 5], vec![7, 11]]), 2);
        assert_eq!(integer_rank(&[]), 0);
    }

    #[test]
    fn column_space_and_kernel_are_complementary() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        let cs = column_space(&m, RankTolerance::EXACT);
        let ker = kernel(&m, RankTolerance::EXACT);
        assert_eq!(cs.ncols(), 2);
        assert_eq!(ker.ncols(), 1);
        assert!((&m * &ker).norm() < 1e-12);
        assert_eq!(numerical_rank(&m, RankTolerance::EXACT), 2);
    }

    #[test]
    fn nearly_singular_two_by_two_vectors_are_accurate() {
        let u = DVector::from_vec(vec![1.0, 2.9538]).normalize();
        let v = DVector::from_vec(vec![0.8688904988779822, 0.4950043443845429]);
        let m = &u * v.transpose() * 36.3 + DMatrix::from_row_slice(2, 2, &[0.0, 1e-12, 0.0, 0.0]);
        let cs = column_space(&m, RankTolerance::FD);
        assert_eq!(cs.ncols(), 1);
        assert!((cs.column(0).dot(&u).abs() - 1.0).abs() < 1e-12);
        let ker = kernel(&m, RankTolerance::FD);
        assert!(ker.column(0).dot(&v).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let m = DMatrix::<f64>::zeros(3, 4);
        assert_eq!(numerical_rank(&m, RankTolerance::EXACT), 0);
        assert_eq!(column_space(&m, RankTolerance::EXACT).ncols(), 0);
        assert_eq!(kernel(&m, RankTolerance::EXACT).ncols(), 4);
    }
}
