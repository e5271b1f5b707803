//! Numerical tolerances shared across the crate.

use serde::{Deserialize, Serialize};

/// Orthonormality tolerance for stored subspace bases.
pub const TOL_ORTHO: f64 = 1e-12;
/// Residual below which a vector is considered dependent during orthonormalization.
pub const TOL_RANK: f64 = 1e-10;
/// Relative singular-value cutoff for exactly computed matrices.
pub const SV_REL_TOL: f64 = 1e-8;
/// Relative singular-value cutoff for finite-difference matrices.
pub const FD_SV_REL_TOL: f64 = 1e-6;
/// Absolute floor for finite-difference singular values (roundoff of a central
/// difference with step 1e-6 is about 1e-10).
pub const FD_SV_ABS_FLOOR: f64 = 1e-8;
/// Containment / orthogonality threshold used by the classifier.
pub const TOL_CONTAIN: f64 = 1e-9;

/// Overridable tolerances for path tracing, collision detection and
/// finite-difference ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Residual cutoff for orthonormalization.
    pub tol_rank: f64,
    /// Relative discriminant cutoff: a root pair is tangential when
    /// `disc < disc_tol * scale^2`.
    pub disc_tol: f64,
    /// Minimal separation between consecutive collision times.
    pub t_min_gap: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Relative singular-value cutoff for finite-difference ranks.
    pub fd_rank_rel: f64,
    /// Absolute singular-value floor for finite-difference ranks.
    pub fd_rank_abs: f64,
    /// Penetration allowance when checking that a point lies outside a cylinder.
    pub contact_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_rank: TOL_RANK,
            disc_tol: 1e-12,
            t_min_gap: 1e-9,
            fd_step: 1e-6,
            fd_rank_rel: FD_SV_REL_TOL,
            fd_rank_abs: FD_SV_ABS_FLOOR,
            contact_tol: 1e-9,
        }
    }
}
