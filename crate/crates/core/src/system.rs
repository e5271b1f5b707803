//! Cylindric billiard systems: a lattice plus spherical cylinders whose
//! generator subspaces are spanned by lattice vectors.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::geometry::{integer_rank, Lattice, Subspace};
use crate::error::{Error, Result};

/// How the generator subspace `A_i` of a cylinder is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Integer coefficient vectors with respect to the lattice basis. Each
    /// inner vector has length `d`; the real span of the corresponding
    /// lattice vectors is `A_i`, which is then a lattice subspace by
    /// construction.
    Lattice(Vec<Vec<i64>>),
    /// Real spanning vectors, used only when an integer description could not
    /// be recovered numerically (factor systems).
    Real { vectors: Vec<Vec<f64>>, note: String },
}

impl Generator {
    /// The spherical case `A_i = {0}`.
    pub fn point() -> Self {
        Generator::Lattice(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSpec {
    pub generator: Generator,
    pub radius: f64,
    translation: Vec<f64>,
}

impl CylinderSpec {
    /// `translation` holds lattice coordinates; it is reduced into `[0, 1)^d`.
    pub fn new(generator: Generator, radius: f64, translation: Vec<f64>) -> Self {
        Self { generator, radius, translation: canonical_fraction(&translation) }
    }

    /// Fundamental-domain lattice coordinates of the translation `t_i`.
    pub fn translation(&self) -> &[f64] {
        &self.translation
    }
}

fn canonical_fraction(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&c| {
            let f = c - c.floor();
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        })
        .collect()
}

/// Immutable cylindric billiard system with its derived subspaces.
#[derive(Debug, Clone)]
pub struct CylindricBilliardSystem {
    lattice: Lattice,
    cylinders: Vec<CylinderSpec>,
    interior_connected_asserted: bool,
    generator_spaces: Vec<Subspace>,
    base_spaces: Vec<Subspace>,
}

impl CylindricBilliardSystem {
    /// Builds the system and its derived subspaces. Only structural problems
    /// (mismatched dimensions, non-finite numbers) are errors here; the
    /// remaining invariants are reported by [`validate`](Self::validate).
    pub fn new(lattice: Lattice, cylinders: Vec<CylinderSpec>) -> Result<Self> {
        let d = lattice.dim();
        let mut generator_spaces = Vec::with_capacity(cylinders.len());
        let mut base_spaces = Vec::with_capacity(cylinders.len());
        for (i, c) in cylinders.iter().enumerate() {
            if c.translation.len() != d {
                return Err(Error::InvalidInput(format!(
                    "cylinder {i}: translation has length {}, expected {d}",
                    c.translation.len()
                )));
            }
            if !c.radius.is_finite() || c.translation.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("cylinder {i}: non-finite radius or translation")));
            }
            let vectors: Vec<DVector<f64>> = match &c.generator {
                Generator::Lattice(coeffs) => coeffs
                    .iter()
                    .map(|row| {
                        if row.len() != d {
                            return Err(Error::InvalidInput(format!(
                                "cylinder {i}: generator coefficient vector has length {}, expected {d}",
                                row.len()
                            )));
                        }
                        Ok(lattice.lattice_point(row))
                    })
                    .collect::<Result<_>>()?,
                Generator::Real { vectors, .. } => vectors
                    .iter()
                    .map(|v| {
                        if v.len() != d || v.iter().any(|x| !x.is_finite()) {
                            return Err(Error::InvalidInput(format!(
                                "cylinder {i}: real generator vector malformed"
                            )));
                        }
                        Ok(DVector::from_column_slice(v))
                    })
                    .collect::<Result<_>>()?,
            };
            let a = Subspace::orthonormalize(d, &vectors)?;
            base_spaces.push(a.complement());
            generator_spaces.push(a);
        }
        Ok(Self { lattice, cylinders, interior_connected_asserted: false, generator_spaces, base_spaces })
    }

    /// Records the user's assertion that the configuration-space interior is
    /// connected (never checked).
    pub fn with_interior_connected_asserted(mut self, asserted: bool) -> Self {
        self.interior_connected_asserted = asserted;
        self
    }

    pub fn interior_connected_asserted(&self) -> bool {
        self.interior_connected_asserted
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cylinders(&self) -> &[CylinderSpec] {
        &self.cylinders
    }

    pub fn num_cylinders(&self) -> usize {
        self.cylinders.len()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.cylinders.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.cylinders.len() });
        }
        Ok(())
    }

    /// Base space `L_i = A_i^⊥`.
    pub fn base_space(&self, i: usize) -> Result<&Subspace> {
        self.check_index(i)?;
        Ok(&self.base_spaces[i])
    }

    /// Generator space `A_i`.
    pub fn generator_space(&self, i: usize) -> Result<&Subspace> {
        self.check_index(i)?;
        Ok(&self.generator_spaces[i])
    }

    pub fn base_spaces(&self) -> &[Subspace] {
        &self.base_spaces
    }

    pub fn generator_spaces(&self) -> &[Subspace] {
        &self.generator_spaces
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.cylinders[i].radius
    }

    pub fn max_radius(&self) -> f64 {
        self.cylinders.iter().map(|c| c.radius).fold(0.0, f64::max)
    }

    /// Translation `t_i` as an ambient vector in the fundamental domain.
    pub fn translation(&self, i: usize) -> DVector<f64> {
        self.lattice.point(&DVector::from_column_slice(&self.cylinders[i].translation))
    }

    pub fn validate(&self) -> ValidationReport {
        let d = self.dim();
        let mut issues = Vec::new();
        for (i, c) in self.cylinders.iter().enumerate() {
            if c.radius <= 0.0 {
                issues.push(ValidationIssue::new(Some(i), IssueKind::NonPositiveRadius, format!("radius {} ≤ 0", c.radius)));
            }
            match &c.generator {
                Generator::Lattice(coeffs) => {
                    let r = integer_rank(coeffs);
                    if r != coeffs.len() {
                        issues.push(ValidationIssue::new(
                            Some(i),
                            IssueKind::GeneratorRankDeficient,
                            format!("generator coefficients have rank {r} < {} columns", coeffs.len()),
                        ));
                    }
                }
                Generator::Real { vectors, .. } => {
                    if self.generator_spaces[i].dim() != vectors.len() {
                        issues.push(ValidationIssue::new(
                            Some(i),
                            IssueKind::GeneratorRankDeficient,
                            format!(
                                "real generator vectors have rank {} < {}",
                                self.generator_spaces[i].dim(),
                                vectors.len()
                            ),
                        ));
                    }
                }
            }
            let nu = self.base_spaces[i].dim();
            if nu < 2 {
                issues.push(ValidationIssue::new(
                    Some(i),
                    IssueKind::BaseSpaceTooSmall,
                    format!("dim L = {nu} < 2"),
                ));
            }
            if self.generator_spaces[i].dim() + nu != d {
                issues.push(ValidationIssue::new(
                    Some(i),
                    IssueKind::Numerical,
                    "dim A + dim L differs from the ambient dimension".into(),
                ));
            }
        }
        ValidationReport { issues }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    NonPositiveRadius,
    GeneratorRankDeficient,
    BaseSpaceTooSmall,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub cylinder: Option<usize>,
    pub kind: IssueKind,
    pub message: String,
}

impl ValidationIssue {
    fn new(cylinder: Option<usize>, kind: IssueKind, message: String) -> Self {
        Self { cylinder, kind, message }
    }
}

/// Violated invariants; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            match issue.cylinder {
                Some(i) => write!(f, "cylinder {i}: {}", issue.message)?,
                None => write!(f, "{}", issue.message)?,
            }
        }
        Ok(())
    }
}
