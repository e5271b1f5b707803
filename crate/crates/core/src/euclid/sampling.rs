//! Monte Carlo estimates of the typical dimension of `W₊`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{trace, w_plus, EuclideanPathSpec, SymbolicSequence};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::reflect;
use crate::rng::{cube_vector, gaussian_vector, task_rng, unit_vector, TaskRng, GENERATOR_NAME};
use crate::system::CylindricBilliardSystem;

/// Probability measure used to draw Euclidean path specs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingMeasure {
    /// `V₀` uniform on the sphere, offsets uniform in a cube of base
    /// coordinates (half-width defaults to `3 · max r_i`), start at 0.
    /// Draws whose trace fails are rejected.
    Box { half_width: Option<f64> },
    /// Builds the path forwards: free flights uniform in
    /// `[flight_min, flight_max] · max r_i`, normals uniform on the unit
    /// sphere of each base space (oriented against the velocity, incidence
    /// cosine at least `min_incidence`), offsets solved from the hit point.
    Constructive { flight_min: f64, flight_max: f64, min_incidence: f64 },
}

impl Default for SamplingMeasure {
    fn default() -> Self {
        SamplingMeasure::Box { half_width: None }
    }
}

impl SamplingMeasure {
    pub fn constructive() -> Self {
        SamplingMeasure::Constructive { flight_min: 0.5, flight_max: 2.0, min_incidence: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub measure: SamplingMeasure,
    /// Draws per sample before the sample is counted as failed.
    pub max_attempts: usize,
    /// Relative size of the neighbourhood explored by the constrained estimate.
    pub neighbourhood: f64,
    pub tolerances: Tolerances,
    pub exec: Exec,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            measure: SamplingMeasure::default(),
            max_attempts: 1000,
            neighbourhood: 0.05,
            tolerances: Tolerances::default(),
            exec: Exec::default(),
        }
    }
}

fn draw(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    rng: &mut TaskRng,
    measure: SamplingMeasure,
) -> Option<EuclideanPathSpec> {
    let d = system.dim();
    let rmax = system.max_radius();
    let v0 = unit_vector(rng, d);
    let start = DVector::zeros(d);
    match measure {
        SamplingMeasure::Box { half_width } => {
            let half = half_width.unwrap_or(3.0 * rmax);
            let offsets =
                sigma.labels().iter().map(|&l| cube_vector(rng, system.base_spaces()[l].dim(), half)).collect();
            Some(EuclideanPathSpec { v0, start, offsets })
        }
        SamplingMeasure::Constructive { flight_min, flight_max, min_incidence } => {
            let mut p = start.clone();
            let mut v = v0.clone();
            let mut offsets = Vec::with_capacity(sigma.len());
            for &l in sigma.labels() {
                let base = &system.base_spaces()[l];
                let s = rng.random_range(flight_min..=flight_max) * rmax;
                p.axpy(s, &v, 1.0);
                let mut n = base.basis() * unit_vector(rng, base.dim());
                let c = v.dot(&n);
                if c.abs() < min_incidence {
                    return None;
                }
                if c > 0.0 {
                    n = -n;
                }
                let a = base.basis().transpose() * (&p - &n * system.radius(l));
                offsets.push(a);
                v = reflect(&v, &n);
            }
            Some(EuclideanPathSpec { v0, start, offsets })
        }
    }
}

/// Draws specs until one traces successfully.
pub fn sample_spec(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    rng: &mut TaskRng,
    config: &SamplingConfig,
) -> Result<EuclideanPathSpec> {
    for _ in 0..config.max_attempts {
        if let Some(spec) = draw(system, sigma, rng, config.measure) {
            if trace(system, sigma, &spec, &config.tolerances).is_ok() {
                return Ok(spec);
            }
        }
    }
    Err(Error::NoValidPath { attempts: config.max_attempts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    /// Largest `dim W₊` seen.
    pub delta: usize,
    pub d_minus_1: usize,
    /// `d − 1 − dim ⋂_j A_{σ(j)}`.
    pub bound: usize,
    /// `2d − 1 − dim ⋂_j A_{σ(j)}`, the dimension of the set of unit-speed
    /// phase points realizing `Σ`.
    pub gamma_dim: usize,
    /// `dim W₊` per sample; `None` when every draw of that sample failed.
    pub dims: Vec<Option<usize>>,
    /// Draws rejected because the trace or a perturbed trace failed.
    pub rejected_draws: usize,
    pub generator: &'static str,
}

impl DeltaReport {
    pub fn is_rich(&self) -> bool {
        self.delta == self.d_minus_1
    }

    pub fn failed_samples(&self) -> usize {
        self.dims.iter().filter(|d| d.is_none()).count()
    }
}

fn finish(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    outcomes: Vec<(Option<usize>, usize)>,
    attempts: usize,
) -> Result<DeltaReport> {
    let d = system.dim();
    let dims: Vec<Option<usize>> = outcomes.iter().map(|o| o.0).collect();
    let rejected_draws = outcomes.iter().map(|o| o.1).sum();
    let delta = dims.iter().flatten().copied().max().ok_or(Error::NoValidPath { attempts })?;
    let cap = sigma.generator_intersection(system)?.dim();
    Ok(DeltaReport {
        delta,
        d_minus_1: d - 1,
        bound: (d - 1).saturating_sub(cap),
        gamma_dim: (2 * d - 1).saturating_sub(cap),
        dims,
        rejected_draws,
        generator: GENERATOR_NAME,
    })
}

/// `Δ(Σ)`: the maximum of `dim W₊` over `n_samples` independent draws.
/// Sample `i` uses its own stream of `seed`, so the estimate is monotone in
/// `n_samples` and independent of the thread count.
pub fn delta_sigma(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    n_samples: usize,
    seed: u64,
    config: &SamplingConfig,
) -> Result<DeltaReport> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let tol = config.tolerances;
    let outcomes = config.exec.map(n_samples, |i| {
        let mut rng = task_rng(seed, i as u64);
        let mut rejected = 0;
        for _ in 0..config.max_attempts {
            if let Some(spec) = draw(system, sigma, &mut rng, config.measure) {
                if let Ok(w) = w_plus(system, sigma, &spec, &tol) {
                    return (Some(w.dim()), rejected);
                }
            }
            rejected += 1;
        }
        (None, rejected)
    });
    finish(system, sigma, outcomes, n_samples * config.max_attempts)
}

/// `Δ(Σ, ā)`: maximum of `dim W₊` over paths with the relative cylinder
/// positions of `base`, explored by perturbing `V₀` and translating all
/// cylinders together in a neighbourhood of `base` (which is sample 0).
pub fn delta_sigma_constrained(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    base: &EuclideanPathSpec,
    n_samples: usize,
    seed: u64,
    config: &SamplingConfig,
) -> Result<DeltaReport> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let tol = config.tolerances;
    trace(system, sigma, base, &tol)?;
    let d = system.dim();
    let shift = config.neighbourhood * system.max_radius();
    let outcomes = config.exec.map(n_samples, |i| {
        if i == 0 {
            if let Ok(w) = w_plus(system, sigma, base, &tol) {
                return (Some(w.dim()), 0);
            }
        }
        let mut rng = task_rng(seed, i as u64);
        let mut rejected = 0;
        for _ in 0..config.max_attempts {
            let g = gaussian_vector(&mut rng, d) * (config.neighbourhood * rng.random::<f64>());
            let v0 = (&base.v0 + g).normalize();
            let a = cube_vector(&mut rng, d, shift);
            let spec = base.with_v0(v0).translate_all(system, sigma, &a);
            if let Ok(w) = w_plus(system, sigma, &spec, &tol) {
                return (Some(w.dim()), rejected);
            }
            rejected += 1;
        }
        (None, rejected)
    });
    finish(system, sigma, outcomes, n_samples * config.max_attempts)
}

/// Combinatorial richness: `Δ(Σ) = d − 1`.
pub fn is_rich(
    system: &CylindricBilliardSystem,
    sigma: &SymbolicSequence,
    n_samples: usize,
    seed: u64,
    config: &SamplingConfig,
) -> Result<bool> {
    Ok(delta_sigma(system, sigma, n_samples, seed, config)?.is_rich())
}
