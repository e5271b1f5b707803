//! Seeded randomness.
//!
//! Every sampling routine derives one independent ChaCha8 stream per task
//! from the user seed, so outcomes do not depend on scheduling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Name and version of the generator, recorded in reports.
pub const GENERATOR_NAME: &str = "chacha8-stream-v1";

pub type TaskRng = ChaCha8Rng;

/// Generator for task `task` under `seed`.
pub fn task_rng(seed: u64, task: u64) -> TaskRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform point on the unit sphere of `dim`-space.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        let n = g.norm();
        if n > 1e-6 {
            return g / n;
        }
    }
}

/// Uniform point of the cube `[-half, half]^dim`.
pub fn cube_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, half: f64) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-half..=half)))
}
