//! Largest Lyapunov exponent by the two-trajectory method.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{next_hit, random_phase, run_for, FlowConfig, FlowState, PhasePoint, TorusGeometry};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{gaussian_vector, task_rng, TaskRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    pub total_time: f64,
    pub renorm_dt: f64,
    pub d0: f64,
    pub seed: u64,
    /// Window ends closer than this to a base collision are moved to the
    /// middle of the surrounding free flight.
    pub align_tol: f64,
    /// Estimates with a larger share of discarded windows are unreliable.
    pub max_discard_fraction: f64,
    pub flow: FlowConfig,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            total_time: 1000.0,
            renorm_dt: 1.0,
            d0: 1e-9,
            seed: 0,
            align_tol: 1e-5,
            max_discard_fraction: 0.2,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowOutcome {
    pub start: f64,
    pub length: f64,
    /// `log(sep / d0)`, or `None` for a discarded window.
    pub log_growth: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// `Σ log(sep/d0) / Σ length` over accepted windows.
    pub estimate: f64,
    /// Standard error of the mean of the per-window rates.
    pub standard_error: f64,
    pub windows: Vec<WindowOutcome>,
    pub discarded: usize,
    pub unreliable: bool,
}

fn tangent_direction(rng: &mut TaskRng, v: &DVector<f64>) -> DVector<f64> {
    loop {
        let mut g = gaussian_vector(rng, v.len());
        g -= v * g.dot(v);
        let n = g.norm();
        if n > 1e-6 {
            return g / n;
        }
    }
}

fn same_symbols(a: &[(f64, usize, Vec<i64>)], b: &[(f64, usize, Vec<i64>)]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.1 == y.1 && x.2 == y.2)
}

/// Estimates the largest Lyapunov exponent along the orbit of `phase`. A
/// shadow orbit starts `d0` away in a random position direction orthogonal
/// to `v`; both are flowed window by window and the shadow is pulled back to
/// distance `d0` (in position-velocity space) after every window.
pub fn lyapunov_max(geom: &TorusGeometry, phase: &PhasePoint, config: &LyapunovConfig) -> Result<LyapunovReport> {
    if !(config.total_time > 0.0 && config.renorm_dt > 0.0) {
        return Err(Error::InvalidInput("total time and renormalization interval must be positive".into()));
    }
    if !(config.d0 > 0.0 && config.d0 <= 1e-8) {
        return Err(Error::InvalidInput("d0 must lie in (0, 1e-8]".into()));
    }
    let mut rng = task_rng(config.seed, 0);
    let mut base = FlowState::from_phase(geom, phase);
    let zero = DVector::zeros(geom.dim());
    let fresh_shadow = |rng: &mut TaskRng, base: &FlowState| {
        let dq = tangent_direction(rng, &base.v) * config.d0;
        base.displaced(geom, &dq, &zero)
    };
    let mut shadow = fresh_shadow(&mut rng, &base);
    let horizon = config.flow.horizon.unwrap_or_else(|| geom.default_horizon());
    let mut windows = Vec::new();
    let mut t = 0.0;
    while config.total_time - t > 1e-12 {
        let nominal = config.renorm_dt.min(config.total_time - t);
        let mut len = nominal;
        let mut end = base.clone();
        let base_events = match run_for(geom, &mut end, nominal, &config.flow) {
            Ok(ev) => {
                let last = ev.last().map_or(0.0, |e| e.0);
                let next = next_hit(geom, &end, horizon, &config.flow.tolerances).ok().flatten().map(|h| h.time);
                let near_last = !ev.is_empty() && nominal - last < config.align_tol;
                let near_next = next.is_some_and(|s| s < config.align_tol);
                if near_last || near_next {
                    let flight_end = nominal + next.unwrap_or(config.align_tol);
                    len = 0.5 * (last + flight_end);
                    end = base.clone();
                    run_for(geom, &mut end, len, &config.flow)
                } else {
                    Ok(ev)
                }
            }
            Err(e) => Err(e),
        }?;
        let mut shadow_end = shadow.clone();
        let outcome = match run_for(geom, &mut shadow_end, len, &config.flow) {
            Ok(ev) if same_symbols(&base_events, &ev) => {
                let dq = end.position_delta(geom, &shadow_end);
                let dv = &shadow_end.v - &end.v;
                let sep = (dq.norm_squared() + dv.norm_squared()).sqrt();
                let s = config.d0 / sep;
                shadow = end.displaced(geom, &(dq * s), &(dv * s));
                WindowOutcome { start: t, length: len, log_growth: Some((sep / config.d0).ln()), note: None }
            }
            Ok(_) => {
                shadow = fresh_shadow(&mut rng, &end);
                WindowOutcome { start: t, length: len, log_growth: None, note: Some("collision sequences differ".into()) }
            }
            Err(e) => {
                shadow = fresh_shadow(&mut rng, &end);
                WindowOutcome { start: t, length: len, log_growth: None, note: Some(e.to_string()) }
            }
        };
        windows.push(outcome);
        base = end;
        t += len;
    }
    let accepted: Vec<&WindowOutcome> = windows.iter().filter(|w| w.log_growth.is_some()).collect();
    let discarded = windows.len() - accepted.len();
    let total_len: f64 = accepted.iter().map(|w| w.length).sum();
    let total_log: f64 = accepted.iter().filter_map(|w| w.log_growth).sum();
    let estimate = if total_len > 0.0 { total_log / total_len } else { f64::NAN };
    let rates: Vec<f64> = accepted.iter().map(|w| w.log_growth.unwrap_or(0.0) / w.length).collect();
    let n = rates.len() as f64;
    let standard_error = if rates.len() > 1 {
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    let unreliable = windows.is_empty() || discarded as f64 > config.max_discard_fraction * windows.len() as f64;
    Ok(LyapunovReport { estimate, standard_error, windows, discarded, unreliable })
}

/// Independent estimates from `runs` random starting points. Run `i` draws
/// its start from stream `i` of `config.seed` and uses seed `config.seed + i`
/// for its shadow orbit.
pub fn lyapunov_ensemble(
    geom: &TorusGeometry,
    runs: usize,
    config: &LyapunovConfig,
    exec: Exec,
) -> Result<Vec<LyapunovReport>> {
    exec.map(runs, |i| {
        let phase = random_phase(geom, &mut task_rng(config.seed, i as u64))?;
        let cfg = LyapunovConfig { seed: config.seed.wrapping_add(i as u64), ..*config };
        lyapunov_max(geom, &phase, &cfg)
    })
    .into_iter()
    .collect()
}
