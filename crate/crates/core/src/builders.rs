//! Constructors for hard-ball systems, direct-sum systems and sub-billiards.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::{non_orthogonality_graph, Graph};
use crate::error::{Error, Result};
use crate::geometry::{integer_rank, lattice::round_integral, reduce_generators, Lattice, Subspace};
use crate::system::{CylinderSpec, CylindricBilliardSystem, Generator};

const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardBallParams {
    /// Number of balls.
    pub n: usize,
    /// Dimension of the torus the balls move on.
    pub nu: usize,
    pub masses: Vec<f64>,
    /// Ball radius.
    pub r: f64,
}

impl HardBallParams {
    pub fn equal_masses(n: usize, nu: usize, r: f64) -> Self {
        Self { n, nu, masses: vec![1.0; n], r }
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 2 || self.nu < 2 {
            return Err(Error::InvalidInput(format!("need N >= 2 and nu >= 2, got N={} nu={}", self.n, self.nu)));
        }
        if self.masses.len() != self.n {
            return Err(Error::InvalidInput(format!("{} masses given for {} balls", self.masses.len(), self.n)));
        }
        if self.masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidInput("masses must be positive and finite".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidInput("ball radius must be positive".into()));
        }
        Ok(())
    }

    /// Collision radius `2r·sqrt(m_i m_j / (m_i + m_j))` of the pair `(i, j)`.
    pub fn pair_radius(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.masses[i], self.masses[j]);
        2.0 * self.r * (a * b / (a + b)).sqrt()
    }
}

/// How the reduced hard-ball system sits inside the mass-rescaled
/// configuration space `R^{νN}` (coordinates `x_{i,k} = sqrt(m_i) q_{i,k}`,
/// index `i·ν + k`).
#[derive(Debug, Clone)]
pub struct HardBallEmbedding {
    pub params: HardBallParams,
    /// Orthonormal basis of the zero-momentum subspace `Z` (νN × ν(N−1)).
    pub z_basis: DMatrix<f64>,
    /// Ball pair of each cylinder, in cylinder order.
    pub pairs: Vec<(usize, usize)>,
}

impl HardBallEmbedding {
    /// Reduced coordinates of ball positions `q[i]` (each of length ν).
    pub fn reduce_positions(&self, q: &[Vec<f64>]) -> Result<DVector<f64>> {
        Ok(self.z_basis.transpose() * self.rescale(q)?)
    }

    /// Reduced velocity of ball velocities `v[i]`; the centre-of-mass part is
    /// dropped.
    pub fn reduce_velocities(&self, v: &[Vec<f64>]) -> Result<DVector<f64>> {
        self.reduce_positions(v)
    }

    fn rescale(&self, q: &[Vec<f64>]) -> Result<DVector<f64>> {
        let (n, nu) = (self.params.n, self.params.nu);
        if q.len() != n || q.iter().any(|x| x.len() != nu) {
            return Err(Error::InvalidInput(format!("expected {n} vectors of length {nu}")));
        }
        Ok(DVector::from_fn(n * nu, |idx, _| self.params.masses[idx / nu].sqrt() * q[idx / nu][idx % nu]))
    }

    /// Projections onto `Z` of `sqrt(m_i) e_{i,k}` for `i < N−1`; an exact
    /// basis of the reduced lattice in reduced coordinates.
    pub fn exact_lattice_basis(&self) -> DMatrix<f64> {
        let (n, nu) = (self.params.n, self.params.nu);
        let cols: Vec<DVector<f64>> = (0..(n - 1) * nu)
            .map(|idx| {
                let mut e = DVector::zeros(n * nu);
                e[idx] = self.params.masses[idx / nu].sqrt();
                self.z_basis.transpose() * e
            })
            .collect();
        DMatrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone)]
pub struct HardBallBuild {
    pub system: CylindricBilliardSystem,
    pub embedding: HardBallEmbedding,
}

/// Builds the reduced `ν(N−1)`-dimensional cylindric billiard of `N` hard
/// balls on the `ν`-torus.
pub fn hard_ball_system(params: &HardBallParams) -> Result<HardBallBuild> {
    params.check()?;
    let (n, nu) = (params.n, params.nu);
    let big = n * nu;
    let sqrt_m: Vec<f64> = params.masses.iter().map(|m| m.sqrt()).collect();
    let e = |i: usize, k: usize, scale: f64| {
        let mut v = DVector::zeros(big);
        v[i * nu + k] = scale;
        v
    };

    // Z^⊥ is spanned by the centre-of-mass directions w_k.
    let w: Vec<DVector<f64>> =
        (0..nu).map(|k| (0..n).fold(DVector::zeros(big), |acc, i| acc + e(i, k, sqrt_m[i]))).collect();
    let z = Subspace::orthonormalize(big, &w)?.complement();
    let q = z.basis().clone();
    let d = q.ncols();
    debug_assert_eq!(d, nu * (n - 1));

    let project = |v: &DVector<f64>| q.transpose() * v;
    let gens: Vec<DVector<f64>> = (0..n).flat_map(|i| (0..nu).map(move |k| (i, k))).map(|(i, k)| project(&e(i, k, sqrt_m[i]))).collect();
    let red = reduce_generators(&DMatrix::from_columns(&gens))?;
    let lattice = Lattice::new(red.basis)?;

    let mut pairs = Vec::new();
    let mut cylinders = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut vectors = Vec::new();
            for l in (0..n).filter(|&l| l != i && l != j) {
                for k in 0..nu {
                    vectors.push(project(&e(l, k, sqrt_m[l])));
                }
            }
            for k in 0..nu {
                vectors.push(project(&(e(i, k, sqrt_m[i]) + e(j, k, sqrt_m[j]))));
            }
            let coeffs = integer_generators(&lattice, &vectors)?;
            pairs.push((i, j));
            cylinders.push(CylinderSpec::new(Generator::Lattice(coeffs), params.pair_radius(i, j), vec![0.0; d]));
        }
    }
    let system = CylindricBilliardSystem::new(lattice, cylinders)?;
    Ok(HardBallBuild { system, embedding: HardBallEmbedding { params: params.clone(), z_basis: q, pairs } })
}

/// Expresses lattice vectors in the lattice basis and keeps a maximal
/// linearly independent subset.
fn integer_generators(lattice: &Lattice, vectors: &[DVector<f64>]) -> Result<Vec<Vec<i64>>> {
    let mut kept: Vec<Vec<i64>> = Vec::new();
    for v in vectors {
        let c = round_integral(&lattice.coords(v), INTEGRALITY_TOL)
            .ok_or_else(|| Error::Numerical("generator vector is not a lattice vector".into()))?;
        kept.push(c);
        if integer_rank(&kept) < kept.len() {
            kept.pop();
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone)]
pub struct DirectSumBuild {
    pub system: CylindricBilliardSystem,
    pub graph: Graph,
}

/// System whose base spaces are the given `L_i`, which must form a linear
/// direct sum of the ambient space. The lattice is the dual of the basis
/// obtained by concatenating the `L_i` bases, so every `A_i = L_i^⊥` is
/// spanned by dual vectors of the other blocks. `translations` are ambient.
pub fn direct_sum_system(bases: &[Subspace], radii: &[f64], translations: &[DVector<f64>]) -> Result<DirectSumBuild> {
    let d = bases.first().map(Subspace::ambient_dim).ok_or_else(|| Error::NotDirectSum("no blocks".into()))?;
    if radii.len() != bases.len() || translations.len() != bases.len() {
        return Err(Error::InvalidInput("one radius and one translation per block required".into()));
    }
    for b in bases {
        crate::geometry::check_dim(d, b.ambient_dim())?;
    }
    let total: usize = bases.iter().map(Subspace::dim).sum();
    if total != d {
        return Err(Error::NotDirectSum(format!("block dimensions sum to {total}, ambient dimension is {d}")));
    }
    let cols: Vec<DVector<f64>> = bases.iter().flat_map(Subspace::basis_vectors).collect();
    let f = DMatrix::from_columns(&cols);
    if crate::geometry::numerical_rank(&f, crate::geometry::RankTolerance::EXACT) != d {
        return Err(Error::NotDirectSum("blocks are linearly dependent".into()));
    }
    let dual = f
        .try_inverse()
        .ok_or_else(|| Error::NotDirectSum("block basis is singular".into()))?
        .transpose();
    let lattice = Lattice::new(dual)?;
    let mut offsets = Vec::with_capacity(bases.len());
    let mut start = 0;
    for b in bases {
        offsets.push(start..start + b.dim());
        start += b.dim();
    }
    let mut cylinders = Vec::with_capacity(bases.len());
    for (i, range) in offsets.iter().enumerate() {
        let coeffs = (0..d)
            .filter(|a| !range.contains(a))
            .map(|a| (0..d).map(|b| i64::from(a == b)).collect())
            .collect();
        crate::geometry::check_dim(d, translations[i].len())?;
        let t = lattice.coords(&translations[i]);
        cylinders.push(CylinderSpec::new(Generator::Lattice(coeffs), radii[i], t.iter().copied().collect()));
    }
    let system = CylindricBilliardSystem::new(lattice, cylinders)?;
    let graph = non_orthogonality_graph(system.base_spaces())?;
    Ok(DirectSumBuild { system, graph })
}

#[derive(Debug, Clone)]
pub struct SubBilliard {
    /// The factor system, in coordinates of `e_plus`'s basis.
    pub system: CylindricBilliardSystem,
    /// Selected cylinder indices of the original system, in order.
    pub indices: Vec<usize>,
    pub e_plus: Subspace,
    pub e_zero: Subspace,
    /// Integer lattice vectors (original basis coefficients) spanning `E0`.
    pub e_zero_lattice: Vec<Vec<i64>>,
    pub notes: Vec<String>,
}

/// Factor system on `E+ = span{L_i : i ∈ I}` with lattice `P_{E+}(ℒ)`.
/// Fails if `E0 = (E+)^⊥` cannot be confirmed as a lattice subspace.
pub fn sub_billiard(system: &CylindricBilliardSystem, indices: &[usize]) -> Result<SubBilliard> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("sub-billiard index set is empty".into()));
    }
    let mut idx = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    let d = system.dim();
    let ls: Vec<Subspace> = idx.iter().map(|&i| system.base_space(i).cloned()).collect::<Result<_>>()?;
    let e_plus = Subspace::span_of(d, &ls)?;
    let e_zero = e_plus.complement();
    let m = e_plus.dim();
    let to_plus = |v: &DVector<f64>| e_plus.basis().transpose() * v;

    let b = system.lattice().basis();
    let gens = DMatrix::from_columns(&b.column_iter().map(|c| to_plus(&c.into_owned())).collect::<Vec<_>>());
    let red = reduce_generators(&gens).map_err(|e| Error::LatticeSubspace(format!("projected lattice is not discrete: {e}")))?;
    if red.basis.ncols() != m || red.relations.ncols() != d - m {
        return Err(Error::LatticeSubspace(format!(
            "projected lattice has rank {} with {} relations; expected {m} and {}",
            red.basis.ncols(),
            red.relations.ncols(),
            d - m
        )));
    }
    let e_zero_lattice: Vec<Vec<i64>> = red.relations.column_iter().map(|c| c.iter().copied().collect()).collect();
    let rel_vectors: Vec<DVector<f64>> = e_zero_lattice.iter().map(|u| system.lattice().lattice_point(u)).collect();
    let rel_span = Subspace::orthonormalize(d, &rel_vectors)?;
    if !rel_span.same_as(&e_zero, 1e-8) {
        return Err(Error::LatticeSubspace("integer relations do not span E0".into()));
    }
    let lattice = Lattice::new(red.basis)?;

    let mut notes = Vec::new();
    if m < d {
        notes.push(
            "factor lattice is the full projection P_{E+}(L); a finite covering may separate it from the true factor torus"
                .into(),
        );
    }
    let mut cylinders = Vec::with_capacity(idx.len());
    for &i in &idx {
        let spec = &system.cylinders()[i];
        let vectors: Vec<DVector<f64>> = match &spec.generator {
            Generator::Lattice(coeffs) => coeffs.iter().map(|c| to_plus(&system.lattice().lattice_point(c))).collect(),
            Generator::Real { vectors, .. } => vectors.iter().map(|v| to_plus(&DVector::from_column_slice(v))).collect(),
        };
        let generator = match (&spec.generator, integer_generators(&lattice, &vectors)) {
            (Generator::Lattice(_), Ok(coeffs)) => Generator::Lattice(coeffs),
            _ => {
                let basis = Subspace::orthonormalize(m, &vectors)?;
                let note = format!("cylinder {i}: projected generator kept as a real basis");
                notes.push(note.clone());
                Generator::Real { vectors: basis.basis_vectors().iter().map(|v| v.iter().copied().collect()).collect(), note }
            }
        };
        let t = lattice.coords(&to_plus(&system.translation(i)));
        cylinders.push(CylinderSpec::new(generator, spec.radius, t.iter().copied().collect()));
    }
    let factor = CylindricBilliardSystem::new(lattice, cylinders)?
        .with_interior_connected_asserted(system.interior_connected_asserted());
    Ok(SubBilliard { system: factor, indices: idx, e_plus, e_zero, e_zero_lattice, notes })
}
