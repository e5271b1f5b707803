//! Splitting detection, richness certificates and orbit scans.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::{flow, FlowConfig, PhasePoint, StopRule, TorusGeometry, TrajectoryRecord};
use crate::classifier::{count_transitive_blocks, is_transitive, SplittingWitness};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{task_rng, unit_vector, TaskRng};
use crate::system::CylindricBilliardSystem;

#[derive(Debug, Clone)]
pub struct SplittingDetection {
    /// Assignment keys are cylinder labels.
    pub witness: SplittingWitness,
    pub collided: Vec<usize>,
}

/// Coarsest orthogonal splitting respected by every collision of `record`,
/// or `None` when the collided base spaces are transitive. A record without
/// collisions yields a degenerate coordinate splitting.
pub fn detect_splitting(record: &TrajectoryRecord, system: &CylindricBilliardSystem) -> Result<Option<SplittingDetection>> {
    let collided = record.collided();
    let bases = collided.iter().map(|&i| system.base_space(i).cloned()).collect::<Result<Vec<_>>>()?;
    let t = is_transitive(system.dim(), &bases)?;
    if t.transitive {
        return Ok(None);
    }
    let mut witness = t.witness.expect("non-transitive result carries a witness");
    witness.assignment = witness.assignment.into_iter().map(|(k, p)| (collided[k], p)).collect::<BTreeMap<_, _>>();
    witness.check(system.base_spaces())?;
    Ok(Some(SplittingDetection { witness, collided }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RichnessCertificate {
    pub certified: bool,
    pub blocks: usize,
}

/// Whether the recorded symbolic sequence contains at least `c` consecutive
/// transitive blocks.
pub fn richness_certificate(
    record: &TrajectoryRecord,
    system: &CylindricBilliardSystem,
    c: usize,
) -> Result<RichnessCertificate> {
    if c == 0 {
        return Err(Error::InvalidInput("the block constant C must be at least 1".into()));
    }
    let blocks = count_transitive_blocks(record.symbolic.labels(), system)?;
    Ok(RichnessCertificate { certified: blocks >= c, blocks })
}

/// Uniform point of the fundamental domain outside every cylinder, with a
/// uniform direction.
pub fn random_phase(geom: &TorusGeometry, rng: &mut TaskRng) -> Result<PhasePoint> {
    let d = geom.dim();
    let margin = 1e-8;
    for _ in 0..1_000_000 {
        let f = DVector::from_iterator(d, (0..d).map(|_| rng.random::<f64>()));
        let q = geom.system().lattice().point(&f);
        if geom.is_free(&q, margin) {
            return PhasePoint::new(q, unit_vector(rng, d));
        }
    }
    Err(Error::Numerical("no free starting point found; cylinders may cover the torus".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub n_orbits: usize,
    pub n_collisions: usize,
    pub checkpoints: Vec<usize>,
    /// Orbits whose first `checkpoints[k]` collisions admit a splitting.
    pub split_counts: Vec<usize>,
    pub fractions: Vec<f64>,
    /// Orbits stopped by a tangential, simultaneous or cascade event.
    pub degenerate_orbits: usize,
    /// Orbits with fewer collisions than requested (judged on what they have).
    pub short_orbits: usize,
}

/// Flows `n_orbits` random orbits for `n_collisions` collisions and reports,
/// for every checkpoint, the fraction whose prefix admits a splitting.
pub fn splitting_scan(
    geom: &TorusGeometry,
    n_orbits: usize,
    n_collisions: usize,
    checkpoints: &[usize],
    seed: u64,
    config: &FlowConfig,
    exec: Exec,
) -> Result<ScanReport> {
    let mut checkpoints: Vec<usize> = checkpoints.iter().copied().filter(|&c| c <= n_collisions).collect();
    if !checkpoints.contains(&n_collisions) {
        checkpoints.push(n_collisions);
    }
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let system = geom.system();
    let per_orbit = exec.map(n_orbits, |i| -> Result<(Vec<bool>, bool, bool)> {
        let mut rng = task_rng(seed, i as u64);
        let phase = random_phase(geom, &mut rng)?;
        let rec = flow(geom, &phase, StopRule::collisions(n_collisions), config)?;
        let split = checkpoints
            .iter()
            .map(|&c| Ok(detect_splitting(&rec.prefix(c), system)?.is_some()))
            .collect::<Result<Vec<bool>>>()?;
        Ok((split, rec.flags.degenerate(), rec.events.len() < n_collisions))
    });
    let mut split_counts = vec![0; checkpoints.len()];
    let mut degenerate_orbits = 0;
    let mut short_orbits = 0;
    for r in per_orbit {
        let (split, degenerate, short) = r?;
        for (k, s) in split.into_iter().enumerate() {
            split_counts[k] += usize::from(s);
        }
        degenerate_orbits += usize::from(degenerate);
        short_orbits += usize::from(short);
    }
    let fractions = split_counts.iter().map(|&c| c as f64 / n_orbits.max(1) as f64).collect();
    Ok(ScanReport { n_orbits, n_collisions, checkpoints, split_counts, fractions, degenerate_orbits, short_orbits })
}
