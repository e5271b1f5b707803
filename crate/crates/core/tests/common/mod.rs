#![allow(dead_code)]

use cylbill_core::builders::direct_sum_system;
use cylbill_core::euclid::{sample_spec, EuclideanPathSpec, SamplingConfig, SamplingMeasure, SymbolicSequence};
use cylbill_core::geometry::{Lattice, Subspace};
use cylbill_core::rng::{gaussian_vector, task_rng, TaskRng};
use cylbill_core::system::{CylinderSpec, CylindricBilliardSystem, Generator};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_orthogonal(rng: &mut TaskRng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    g.qr().q()
}

/// Generic subspace of dimension `k` inside the span of `frame`'s columns.
pub fn random_subspace_in(rng: &mut TaskRng, frame: &DMatrix<f64>, k: usize) -> Subspace {
    let d = frame.nrows();
    let vs: Vec<DVector<f64>> = (0..k).map(|_| frame * gaussian_vector(rng, frame.ncols())).collect();
    Subspace::orthonormalize(d, &vs).unwrap()
}

/// Subspace family for the transitivity oracle. Half the draws are generic;
/// the rest live in two mutually orthogonal blocks, so both outcomes occur.
pub fn random_subspace_family(rng: &mut TaskRng) -> (usize, Vec<Subspace>) {
    let d = rng.random_range(2..=6);
    let k = rng.random_range(1..=4);
    let q = random_orthogonal(rng, d);
    let blocked = d >= 4 && rng.random_bool(0.5);
    let split = if blocked { rng.random_range(2..=d - 2) } else { d };
    let blocks = [q.columns(0, split).into_owned(), q.columns(split, d - split).into_owned()];
    let bases = (0..k)
        .map(|_| {
            let frame = if blocked { &blocks[rng.random_range(0..2)] } else { &blocks[0] };
            let dim = rng.random_range(2..=frame.ncols());
            random_subspace_in(rng, frame, dim)
        })
        .collect();
    (d, bases)
}

/// Random system on a sheared lattice with integer generators of small
/// entries; every base space has dimension at least 2.
pub fn random_system(rng: &mut TaskRng) -> CylindricBilliardSystem {
    let d = rng.random_range(2..=4);
    let basis = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.2..0.2) });
    let lattice = Lattice::new(basis).unwrap();
    let k = rng.random_range(1..=3);
    let cylinders = (0..k)
        .map(|_| {
            let g = rng.random_range(0..=d - 2);
            let coeffs = (0..g).map(|_| (0..d).map(|_| rng.random_range(-1..=1)).collect()).collect();
            let t = (0..d).map(|_| rng.random::<f64>()).collect();
            CylinderSpec::new(Generator::Lattice(coeffs), rng.random_range(0.1..0.3), t)
        })
        .collect();
    CylindricBilliardSystem::new(lattice, cylinders).unwrap()
}

pub fn random_sigma(rng: &mut TaskRng, system: &CylindricBilliardSystem, max_len: usize) -> SymbolicSequence {
    let m = rng.random_range(1..=max_len);
    let labels = (0..m).map(|_| rng.random_range(0..system.num_cylinders())).collect();
    SymbolicSequence::new(labels, system).unwrap()
}

pub fn constructive_config() -> SamplingConfig {
    SamplingConfig { measure: SamplingMeasure::constructive(), ..Default::default() }
}

pub struct Triple {
    pub system: CylindricBilliardSystem,
    pub sigma: SymbolicSequence,
    pub spec: EuclideanPathSpec,
}

/// Seeded (system, Σ, spec) with a successful trace, drawn from the default
/// sampling measure.
pub fn random_triple(seed: u64, index: u64, max_len: usize) -> Triple {
    let mut rng = task_rng(seed, index);
    loop {
        let system = random_system(&mut rng);
        let sigma = random_sigma(&mut rng, &system, max_len);
        if let Ok(spec) = sample_spec(&system, &sigma, &mut rng, &SamplingConfig::default()) {
            return Triple { system, sigma, spec };
        }
    }
}

/// Block dimensions (each at least 2) summing to `d`.
pub fn random_block_dims(rng: &mut TaskRng, d: usize) -> Vec<usize> {
    let mut dims = Vec::new();
    let mut left = d;
    while left > 0 {
        let k = if left < 4 { left } else { rng.random_range(2..=left - 2) };
        dims.push(k);
        left -= k;
    }
    dims
}

/// Direct sum of generic (pairwise non-orthogonal) blocks within each group;
/// different groups occupy orthogonal coordinate ranges.
pub fn random_direct_sum(rng: &mut TaskRng, groups: &[Vec<usize>]) -> CylindricBilliardSystem {
    let d: usize = groups.iter().flatten().sum();
    let mut bases = Vec::new();
    let mut start = 0;
    for g in groups {
        let gd: usize = g.iter().sum();
        let frame = DMatrix::identity(d, d).columns(start, gd).into_owned();
        loop {
            let blocks: Vec<Subspace> = g.iter().map(|&k| random_subspace_in(rng, &frame, k)).collect();
            let cols: Vec<DVector<f64>> = blocks.iter().flat_map(Subspace::basis_vectors).collect();
            let m = DMatrix::from_columns(&cols);
            if m.singular_values().min() > 0.1 {
                bases.extend(blocks);
                break;
            }
        }
        start += gd;
    }
    let radii = vec![0.05; bases.len()];
    let translations = vec![DVector::zeros(d); bases.len()];
    direct_sum_system(&bases, &radii, &translations).unwrap().system
}
