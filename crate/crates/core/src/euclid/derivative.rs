//! Finite-difference derivatives of the final velocity and related ranks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{trace, EuclideanPathResult, EuclideanPathSpec, SymbolicSequence};
use crate::config::Tolerances;
use crate::error::Result;
use crate::geometry::{column_space, kernel, numerical_rank, reflect, unit, RankTolerance, Subspace};
use crate::system::CylindricBilliardSystem;

fn fd_tolerance(tol: &Tolerances) -> RankTolerance {
    RankTolerance { rel: tol.fd_rank_rel, abs: tol.fd_rank_abs }
}

/// Largest allowed `h · |column|`; beyond it the truncation error of the
/// central difference reaches the rank cutoff.
const FD_NONLINEARITY: f64 = 1e-4;
const FD_MIN_STEP: f64 = 1e-11;

/// Richardson-extrapolated central differences `col(i, h)` for `i < n`,
/// starting from step `h0` and shrinking it until every perturbed path
/// traces and the step is small against the largest column.
fn fd_columns<F>(n: usize, h0: f64, col: F) -> Result<Vec<DVector<f64>>>
where
    F: Fn(usize, f64) -> Result<DVector<f64>>,
{
    let mut h = h0;
    loop {
        let richardson = |i| -> Result<DVector<f64>> { Ok((col(i, 0.5 * h)? * 4.0 - col(i, h)?) / 3.0) };
        match (0..n).map(richardson).collect::<Result<Vec<_>>>() {
            Ok(cols) => {
                let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
                if scale * h <= FD_NONLINEARITY || h <= FD_MIN_STEP {
                    return Ok(cols);
                }
                h = (0.1 * FD_NONLINEARITY / scale).max(FD_MIN_STEP).min(0.1 * h);
            }
            Err(e @ crate::error::Error::Trace { .. }) => {
                if h <= FD_MIN_STEP {
                    return Err(e);
                }
                h = (0.1 * h).max(FD_MIN_STEP);
            }
            Err(e) => return Err(e),
        }
    }
}

fn final_velocity(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    Ok(trace(system, sigma, spec, tol)?.final_velocity().clone())
}

/// `M(γ)`: column `i` is the central difference of `V_m` under
/// `translate_all(±h e_i)`. The step starts at `tol.fd_step` and shrinks
/// with the expansion rate of the path.
pub fn dvm_matrix(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let d = system.dim();
    trace(system, sigma, spec, tol)?;
    let cols = fd_columns(d, tol.fd_step, |i, h| {
        let e = unit(d, i) * h;
        let plus = final_velocity(system, sigma, &spec.translate_all(system, sigma, &e), tol)?;
        let minus = final_velocity(system, sigma, &spec.translate_all(system, sigma, &-e), tol)?;
        Ok((plus - minus) / (2.0 * h))
    })?;
    Ok(DMatrix::from_columns(&cols))
}

/// Derivative of `V_m` with respect to independent offset translations; one
/// column per base-space coordinate of every collision.
pub fn translate_each_matrix(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let d = system.dim();
    trace(system, sigma, spec, tol)?;
    let params = offset_params(spec);
    let cols = fd_columns(params.len(), tol.fd_step, |i, h| {
        let (j, k) = params[i];
        let mut plus = spec.clone();
        plus.offsets[j][k] += h;
        let mut minus = spec.clone();
        minus.offsets[j][k] -= h;
        let vp = final_velocity(system, sigma, &plus, tol)?;
        let vm = final_velocity(system, sigma, &minus, tol)?;
        Ok((vp - vm) / (2.0 * h))
    })?;
    if cols.is_empty() {
        return Ok(DMatrix::zeros(d, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

fn offset_params(spec: &EuclideanPathSpec) -> Vec<(usize, usize)> {
    spec.offsets.iter().enumerate().flat_map(|(j, a)| (0..a.len()).map(move |k| (j, k))).collect()
}

/// `W₊(γ)`: column space of `M(γ)` at the finite-difference rank tolerance.
pub fn w_plus(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<Subspace> {
    let m = dvm_matrix(system, sigma, spec, tol)?;
    Ok(Subspace::from_orthonormal_matrix(column_space(&m, fd_tolerance(tol))))
}

/// `W̃₊(γ)`: column space of the independent-translation derivative.
pub fn w_plus_tilde(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<Subspace> {
    let m = translate_each_matrix(system, sigma, spec, tol)?;
    if m.ncols() == 0 {
        return Ok(Subspace::zero(system.dim()));
    }
    Ok(Subspace::from_orthonormal_matrix(column_space(&m, fd_tolerance(tol))))
}

/// Kernel of `M(γ)` together with the orthocomplement of `W₊` carried back
/// through the reflections.
#[derive(Debug, Clone)]
pub struct NeutralSpace {
    pub kernel: Subspace,
    pub w_plus: Subspace,
    /// `(W₊)^⊥ · h_m · … · h_1`.
    pub pulled_back: Subspace,
    /// Largest `|P_{W₊}(x · h_1 · … · h_m)|` over the kernel basis `x`.
    pub residual: f64,
    pub projector_distance: f64,
}

pub fn neutral_space(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<NeutralSpace> {
    let path = trace(system, sigma, spec, tol)?;
    let m = dvm_matrix(system, sigma, spec, tol)?;
    let ftol = fd_tolerance(tol);
    let w = Subspace::from_orthonormal_matrix(column_space(&m, ftol));
    let kernel = Subspace::from_orthonormal_matrix(kernel(&m, ftol));
    let pulled: Vec<DVector<f64>> = w
        .complement()
        .basis_vectors()
        .into_iter()
        .map(|x| path.normals.iter().rev().fold(x, |v, n| reflect(&v, n)))
        .collect();
    let pulled_back = Subspace::orthonormalize(system.dim(), &pulled)?;
    let residual = kernel
        .basis_vectors()
        .into_iter()
        .map(|x| {
            let pushed = path.normals.iter().fold(x, |v, n| reflect(&v, n));
            (w.basis().transpose() * pushed).norm()
        })
        .fold(0.0, f64::max);
    let projector_distance = if kernel.dim() == pulled_back.dim() {
        kernel.projector_distance(&pulled_back)
    } else {
        f64::INFINITY
    };
    Ok(NeutralSpace { kernel, w_plus: w, pulled_back, residual, projector_distance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThetaRank {
    pub rank: usize,
    /// `(d − 1) + Σ_j (ν_j − 1)`.
    pub full: usize,
}

impl ThetaRank {
    pub fn surjective(&self) -> bool {
        self.rank == self.full
    }
}

fn theta_vector(path: &EuclideanPathResult) -> DVector<f64> {
    let d = path.velocities[0].len();
    let mut out = DVector::zeros(d * (1 + path.normals.len()));
    out.rows_mut(0, d).copy_from(&path.velocities[0]);
    for (j, n) in path.normals.iter().enumerate() {
        out.rows_mut(d * (j + 1), d).copy_from(n);
    }
    out
}

/// Finite-difference rank of `spec ↦ (V₀; n₁, …, n_m)` over the sphere of
/// initial velocities and all offset coordinates.
pub fn theta_rank(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<ThetaRank> {
    let d = system.dim();
    trace(system, sigma, spec, tol)?;
    let eval = |s: &EuclideanPathSpec| -> Result<DVector<f64>> { Ok(theta_vector(&trace(system, sigma, s, tol)?)) };
    let tangent = Subspace::orthonormalize(d, std::slice::from_ref(&spec.v0))?.complement().basis_vectors();
    let params = offset_params(spec);
    let cols = fd_columns(tangent.len() + params.len(), tol.fd_step, |i, h| {
        let (plus, minus) = if i < tangent.len() {
            let t = &tangent[i];
            (spec.with_v0((&spec.v0 + t * h).normalize()), spec.with_v0((&spec.v0 - t * h).normalize()))
        } else {
            let (j, k) = params[i - tangent.len()];
            let mut plus = spec.clone();
            plus.offsets[j][k] += h;
            let mut minus = spec.clone();
            minus.offsets[j][k] -= h;
            (plus, minus)
        };
        Ok((eval(&plus)? - eval(&minus)?) / (2.0 * h))
    })?;
    let full = (d - 1)
        + sigma.labels().iter().map(|&l| system.base_spaces()[l].dim().saturating_sub(1)).sum::<usize>();
    let rank = if cols.is_empty() { 0 } else { numerical_rank(&DMatrix::from_columns(&cols), fd_tolerance(tol)) };
    Ok(ThetaRank { rank, full })
}
