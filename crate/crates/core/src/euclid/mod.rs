//! Euclidean paths with a prescribed collision sequence, their perturbation
//! derivatives and typical ranks.

mod derivative;
mod sampling;

pub use derivative::{
    dvm_matrix, neutral_space, theta_rank, translate_each_matrix, w_plus, w_plus_tilde, NeutralSpace, ThetaRank,
};
pub use sampling::{
    delta_sigma, delta_sigma_constrained, is_rich, sample_spec, DeltaReport, SamplingConfig, SamplingMeasure,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result, TraceFailureKind};
use crate::geometry::{reflect, Subspace};
use crate::system::CylindricBilliardSystem;

/// Finite list of cylinder labels `σ(1), …, σ(m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicSequence {
    labels: Vec<usize>,
}

impl SymbolicSequence {
    pub fn new(labels: Vec<usize>, system: &CylindricBilliardSystem) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("symbolic sequence is empty".into()));
        }
        for &l in &labels {
            if l >= system.num_cylinders() {
                return Err(Error::IndexOutOfRange { index: l, len: system.num_cylinders() });
            }
        }
        Ok(Self { labels })
    }

    /// Sequence without validation; used for records built by the flow.
    pub(crate) fn from_labels(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `⋂_j A_{σ(j)}`.
    pub fn generator_intersection(&self, system: &CylindricBilliardSystem) -> Result<Subspace> {
        let a: Vec<Subspace> = self.labels.iter().map(|&l| system.generator_space(l).cloned()).collect::<Result<_>>()?;
        Subspace::intersect(system.dim(), &a)
    }
}

/// Initial velocity, start point and cylinder offsets of a Euclidean path.
/// Offset `a_j` lies in `L_{σ(j)}` and is stored in that base space's
/// coordinates; cylinder `j` is `{x : |P_{L}(x − a_j)| < r_{σ(j)}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPathSpec {
    pub v0: DVector<f64>,
    pub start: DVector<f64>,
    pub offsets: Vec<DVector<f64>>,
}

impl EuclideanPathSpec {
    pub fn new(
        system: &CylindricBilliardSystem,
        sigma: &SymbolicSequence,
        v0: DVector<f64>,
        start: DVector<f64>,
        offsets: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let d = system.dim();
        crate::geometry::check_dim(d, v0.len())?;
        crate::geometry::check_dim(d, start.len())?;
        if (v0.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("initial velocity has norm {}", v0.norm())));
        }
        if offsets.len() != sigma.len() {
            return Err(Error::InvalidInput(format!("{} offsets for {} collisions", offsets.len(), sigma.len())));
        }
        for (j, (&l, a)) in sigma.labels().iter().zip(&offsets).enumerate() {
            let nu = system.base_space(l)?.dim();
            if a.len() != nu {
                return Err(Error::InvalidInput(format!(
                    "offset {j} has {} base coordinates, base space has dimension {nu}",
                    a.len()
                )));
            }
        }
        Ok(Self { v0, start, offsets })
    }

    /// Builds a spec from ambient offsets, projecting each onto its base space.
    pub fn from_ambient(
        system: &CylindricBilliardSystem,
        sigma: &SymbolicSequence,
        v0: DVector<f64>,
        start: DVector<f64>,
        ambient: &[DVector<f64>],
    ) -> Result<Self> {
        let offsets = sigma
            .labels()
            .iter()
            .zip(ambient)
            .map(|(&l, a)| system.base_space(l)?.coordinates(a))
            .collect::<Result<_>>()?;
        Self::new(system, sigma, v0, start, offsets)
    }

    pub fn ambient_offset(&self, system: &CylindricBilliardSystem, sigma: &SymbolicSequence, j: usize) -> DVector<f64> {
        system.base_spaces()[sigma.labels()[j]].basis() * &self.offsets[j]
    }

    /// Parallel translation of every cylinder by `a`: `a_j ← a_j + P_{σ(j)} a`.
    pub fn translate_all(&self, system: &CylindricBilliardSystem, sigma: &SymbolicSequence, a: &DVector<f64>) -> Self {
        let offsets = sigma
            .labels()
            .iter()
            .zip(&self.offsets)
            .map(|(&l, o)| o + system.base_spaces()[l].basis().transpose() * a)
            .collect();
        Self { v0: self.v0.clone(), start: self.start.clone(), offsets }
    }

    /// Independent translations `a_j ← a_j + b_j`, `b_j ∈ L_{σ(j)}` ambient.
    pub fn translate_each(
        &self,
        system: &CylindricBilliardSystem,
        sigma: &SymbolicSequence,
        b: &[DVector<f64>],
    ) -> Result<Self> {
        if b.len() != self.offsets.len() {
            return Err(Error::InvalidInput(format!("{} translations for {} collisions", b.len(), self.offsets.len())));
        }
        let mut offsets = Vec::with_capacity(b.len());
        for (j, ((&l, o), bj)) in sigma.labels().iter().zip(&self.offsets).zip(b).enumerate() {
            let base = &system.base_spaces()[l];
            crate::geometry::check_dim(system.dim(), bj.len())?;
            let res = base.residual(bj);
            if res > 1e-10 * bj.norm().max(1.0) {
                return Err(Error::InvalidInput(format!("translation {j} leaves its base space (residual {res:e})")));
            }
            offsets.push(o + base.basis().transpose() * bj);
        }
        Ok(Self { v0: self.v0.clone(), start: self.start.clone(), offsets })
    }

    pub(crate) fn with_v0(&self, v0: DVector<f64>) -> Self {
        Self { v0, start: self.start.clone(), offsets: self.offsets.clone() }
    }
}

/// Collision times, points, velocities `V_0..V_m` and normals of a traced path.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPathResult {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub normals: Vec<DVector<f64>>,
}

impl EuclideanPathResult {
    pub fn final_velocity(&self) -> &DVector<f64> {
        self.velocities.last().expect("velocities always hold V_0")
    }
}

/// Smaller root `s > gap` of `|w + s·u|² = r²`, classified as in the trace.
pub(crate) fn entry_root(w: &DVector<f64>, u: &DVector<f64>, r: f64, tol: &Tolerances) -> std::result::Result<f64, TraceFailureKind> {
    let uu = u.norm_squared();
    if uu <= 1e-300 {
        return Err(TraceFailureKind::NoRealRoot);
    }
    let wu = w.dot(u);
    let disc = wu * wu - uu * (w.norm_squared() - r * r);
    if disc < 0.0 {
        return Err(TraceFailureKind::NoRealRoot);
    }
    if disc < tol.disc_tol * r * r * uu {
        return Err(TraceFailureKind::Tangential);
    }
    let sq = disc.sqrt();
    // Cancellation-free smaller root.
    let s = if wu < 0.0 { (w.norm_squared() - r * r) / (-wu + sq) } else { (-wu - sq) / uu };
    if s <= tol.t_min_gap {
        return Err(TraceFailureKind::NonAdvancing);
    }
    Ok(s)
}

/// Traces the path collision by collision, taking the entry root of each
/// translated cylinder and reflecting in its normal.
pub fn trace(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    spec: &EuclideanPathSpec,
    tol: &Tolerances,
) -> Result<EuclideanPathResult> {
    let m = sigma.len();
    let mut times = Vec::with_capacity(m);
    let mut points = Vec::with_capacity(m);
    let mut velocities = Vec::with_capacity(m + 1);
    let mut normals = Vec::with_capacity(m);
    let mut p = spec.start.clone();
    let mut v = spec.v0.clone();
    let mut t = 0.0;
    velocities.push(v.clone());
    for (j, &label) in sigma.labels().iter().enumerate() {
        let l = &system.base_spaces()[label];
        let r = system.radius(label);
        let b = l.basis();
        // Work in base coordinates: w = P_L(p) - a_j, u = P_L v.
        let w = b.transpose() * &p - &spec.offsets[j];
        let u = b.transpose() * &v;
        let s = entry_root(&w, &u, r, tol).map_err(|kind| Error::Trace { index: j, kind })?;
        t += s;
        p.axpy(s, &v, 1.0);
        let hit = w + u * s;
        let n = b * (&hit / hit.norm());
        v = reflect(&v, &n);
        times.push(t);
        points.push(p.clone());
        velocities.push(v.clone());
        normals.push(n);
    }
    Ok(EuclideanPathResult { times, points, velocities, normals })
}

/// `V_0 · h_1 · … · h_m`, reflections applied in order.
pub fn phi_map(v0: &DVector<f64>, normals: &[DVector<f64>]) -> DVector<f64> {
    normals.iter().fold(v0.clone(), |v, n| reflect(&v, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Lattice;
    use crate::system::{CylinderSpec, Generator};
    use nalgebra::dvector;

    fn sphere(d: usize, r: f64) -> CylindricBilliardSystem {
        CylindricBilliardSystem::new(Lattice::integer(d), vec![CylinderSpec::new(Generator::point(), r, vec![0.0; d])])
            .unwrap()
    }

    #[test]
    fn head_on_reflection() {
        let s = sphere(2, 1.0);
        let sigma = SymbolicSequence::new(vec![0], &s).unwrap();
        let spec = EuclideanPathSpec::new(&s, &sigma, dvector![1.0, 0.0], dvector![-2.0, 0.0], vec![dvector![0.0, 0.0]])
            .unwrap();
        let r = trace(&s, &sigma, &spec, &Tolerances::default()).unwrap();
        assert!((r.times[0] - 1.0).abs() < 1e-15);
        assert!((r.velocities[1].clone() - dvector![-1.0, 0.0]).norm() < 1e-15);
        assert!((r.normals[0].clone() - dvector![-1.0, 0.0]).norm() < 1e-15);
    }

    #[test]
    fn miss_is_no_real_root() {
        let s = sphere(2, 1.0);
        let sigma = SymbolicSequence::new(vec![0], &s).unwrap();
        let spec = EuclideanPathSpec::new(&s, &sigma, dvector![1.0, 0.0], dvector![-2.0, 2.0], vec![dvector![0.0, 0.0]])
            .unwrap();
        let e = trace(&s, &sigma, &spec, &Tolerances::default()).unwrap_err();
        assert!(matches!(e, Error::Trace { index: 0, kind: TraceFailureKind::NoRealRoot }));
    }

    #[test]
    fn grazing_is_tangential_and_inside_start_is_non_advancing() {
        let s = sphere(2, 1.0);
        let sigma = SymbolicSequence::new(vec![0], &s).unwrap();
        let tol = Tolerances::default();
        let graze = EuclideanPathSpec::new(&s, &sigma, dvector![1.0, 0.0], dvector![-2.0, 1.0], vec![dvector![0.0, 0.0]])
            .unwrap();
        assert!(matches!(trace(&s, &sigma, &graze, &tol), Err(Error::Trace { kind: TraceFailureKind::Tangential, .. })));
        let inside = EuclideanPathSpec::new(&s, &sigma, dvector![1.0, 0.0], dvector![0.0, 0.0], vec![dvector![0.0, 0.0]])
            .unwrap();
        assert!(matches!(trace(&s, &sigma, &inside, &tol), Err(Error::Trace { kind: TraceFailureKind::NonAdvancing, .. })));
    }

    #[test]
    fn phi_map_cases() {
        let v = dvector![0.6, 0.8];
        assert!((phi_map(&v, std::slice::from_ref(&v)) + &v).norm() < 1e-15);
        assert!((phi_map(&v, &[dvector![0.8, -0.6]]) - &v).norm() < 1e-15);
    }

    #[test]
    fn translations() {
        let s = sphere(3, 0.5);
        let sigma = SymbolicSequence::new(vec![0, 0], &s).unwrap();
        let spec = EuclideanPathSpec::new(
            &s,
            &sigma,
            dvector![1.0, 0.0, 0.0],
            dvector![0.0, 0.0, 0.0],
            vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(spec.translate_all(&s, &sigma, &DVector::zeros(3)), spec);
        let a = dvector![0.1, -0.2, 0.3];
        let each = spec.translate_each(&s, &sigma, &[a.clone(), a.clone()]).unwrap();
        assert_eq!(each, spec.translate_all(&s, &sigma, &a));
        assert_eq!(spec.translate_each(&s, &sigma, &[DVector::zeros(3), DVector::zeros(3)]).unwrap(), spec);
    }

    #[test]
    fn translate_each_rejects_vectors_outside_base() {
        let s = CylindricBilliardSystem::new(
            Lattice::integer(3),
            vec![CylinderSpec::new(Generator::Lattice(vec![vec![0, 0, 1]]), 0.3, vec![0.0; 3])],
        )
        .unwrap();
        let sigma = SymbolicSequence::new(vec![0], &s).unwrap();
        let spec =
            EuclideanPathSpec::new(&s, &sigma, dvector![1.0, 0.0, 0.0], DVector::zeros(3), vec![dvector![1.0, 0.0]])
                .unwrap();
        assert!(spec.translate_each(&s, &sigma, &[dvector![0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert!(SymbolicSequence::new(vec![], &sphere(2, 0.1)).is_err());
        assert!(SymbolicSequence::new(vec![1], &sphere(2, 0.1)).is_err());
    }
}
