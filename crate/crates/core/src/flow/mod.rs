//! Event-driven toroidal billiard flow.

mod diagnostics;
mod lyapunov;

pub use diagnostics::{
    detect_splitting, random_phase, richness_certificate, splitting_scan, RichnessCertificate, ScanReport,
    SplittingDetection,
};
pub use lyapunov::{lyapunov_ensemble, lyapunov_max, LyapunovConfig, LyapunovReport, WindowOutcome};

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::euclid::{EuclideanPathSpec, SymbolicSequence};
use crate::geometry::{reduce_generators, reflect};
use crate::system::CylindricBilliardSystem;

/// Boxes with more candidate images than this abort the search.
const ENUMERATION_CAP: usize = 5_000_000;

/// Per-cylinder data for image enumeration. Copies of cylinder `i` are
/// indexed by `κ ∈ Z^ν`, the coordinates of the copy's axis offset in the
/// projected lattice `P_L(ℒ)`.
#[derive(Debug, Clone)]
struct CylinderGeometry {
    base: DMatrix<f64>,
    radius: f64,
    /// `bᵀ t`.
    axis: DVector<f64>,
    /// LLL-reduced basis of `P_L(ℒ)` in base coordinates, used to enumerate.
    red: DMatrix<f64>,
    red_inv: DMatrix<f64>,
    red_row_norms: Vec<f64>,
    /// Basis in which images are reported.
    rep: DMatrix<f64>,
    rep_inv: DMatrix<f64>,
    /// Maps original lattice coefficients to reported image coordinates.
    lattice_to_rep: DMatrix<i64>,
}

/// Precomputed geometry of a system for collision detection.
#[derive(Debug, Clone)]
pub struct TorusGeometry {
    system: CylindricBilliardSystem,
    cylinders: Vec<CylinderGeometry>,
    diameter: f64,
}

fn round_matrix(m: &DMatrix<f64>) -> Result<DMatrix<i64>> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (o, &x) in out.iter_mut().zip(m.iter()) {
        let r = x.round();
        if (x - r).abs() > 1e-6 {
            return Err(Error::Numerical("projected lattice coordinates are not integral".into()));
        }
        *o = r as i64;
    }
    Ok(out)
}

impl TorusGeometry {
    pub fn new(system: &CylindricBilliardSystem) -> Result<Self> {
        let lattice = system.lattice();
        let mut cylinders = Vec::with_capacity(system.num_cylinders());
        for i in 0..system.num_cylinders() {
            let base = system.base_spaces()[i].basis().clone();
            let nu = base.ncols();
            let gens = base.transpose() * lattice.basis();
            let red = reduce_generators(&gens)?.basis;
            if red.ncols() != nu {
                return Err(Error::Numerical(format!("projected lattice of cylinder {i} has wrong rank")));
            }
            let red_inv = red.clone().try_inverse().ok_or_else(|| Error::Numerical("singular projected lattice".into()))?;
            let red_row_norms = red_inv.row_iter().map(|r| r.norm()).collect();
            let rep = if nu == system.dim() { gens.clone() } else { red.clone() };
            let rep_inv = rep.clone().try_inverse().ok_or_else(|| Error::Numerical("singular projected lattice".into()))?;
            let lattice_to_rep = round_matrix(&(&rep_inv * &gens))?;
            cylinders.push(CylinderGeometry {
                axis: base.transpose() * system.translation(i),
                base,
                radius: system.radius(i),
                red,
                red_inv,
                red_row_norms,
                rep,
                rep_inv,
                lattice_to_rep,
            });
        }
        Ok(Self { system: system.clone(), cylinders, diameter: lattice.diameter_bound() })
    }

    pub fn system(&self) -> &CylindricBilliardSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Upper bound on the diameter of a fundamental domain.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Default search horizon: ten fundamental-domain diameters.
    pub fn default_horizon(&self) -> f64 {
        10.0 * self.diameter
    }

    /// Axis offset of image `κ` (reported coordinates) of cylinder `i`, as an
    /// ambient vector in `L_i`.
    pub fn image_offset(&self, i: usize, kappa: &[i64]) -> DVector<f64> {
        let c = &self.cylinders[i];
        let k = DVector::from_iterator(kappa.len(), kappa.iter().map(|&x| x as f64));
        &c.base * (&c.axis + &c.rep * k)
    }

    /// Smallest `dist(P_L(q − t − λ)) − r` over all cylinders and images, with
    /// the cylinder attaining it.
    pub fn clearance(&self, q: &DVector<f64>) -> (usize, f64) {
        let (qw, _) = self.system.lattice().wrap(q);
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.cylinders.iter().enumerate() {
            let y = c.base.transpose() * &qw - &c.axis;
            let reach = c.radius + self.diameter;
            let _ = enumerate_box(c, &y, reach, |kappa| {
                let p = &c.red * kappa;
                let dist = (&y - p).norm() - c.radius;
                if dist < best.1 {
                    best = (i, dist);
                }
            });
        }
        best
    }

    /// Whether `q` is at least `margin` away from every cylinder.
    pub fn is_free(&self, q: &DVector<f64>, margin: f64) -> bool {
        let (qw, _) = self.system.lattice().wrap(q);
        self.cylinders.iter().all(|c| {
            let y = c.base.transpose() * &qw - &c.axis;
            let reach = c.radius + margin;
            let mut free = true;
            let scanned = enumerate_box(c, &y, reach, |kappa| {
                if free && (&y - &c.red * kappa).norm() < reach {
                    free = false;
                }
            });
            free && scanned.is_ok()
        })
    }
}

/// Calls `f` for every `κ` whose image lies within `radius` of `center`
/// (base coordinates), scanning the box given by the dual row norms.
fn enumerate_box<F: FnMut(&DVector<f64>)>(
    c: &CylinderGeometry,
    center: &DVector<f64>,
    radius: f64,
    mut f: F,
) -> Result<()> {
    let nu = center.len();
    let mid = &c.red_inv * center;
    let mut lo = Vec::with_capacity(nu);
    let mut hi = Vec::with_capacity(nu);
    let mut total: usize = 1;
    for a in 0..nu {
        let span = c.red_row_norms[a] * radius;
        let l = (mid[a] - span).floor() as i64;
        let h = (mid[a] + span).ceil() as i64;
        lo.push(l);
        hi.push(h);
        total = total.saturating_mul((h - l + 1) as usize);
    }
    if total > ENUMERATION_CAP {
        return Err(Error::Numerical(format!("image enumeration box of {total} points exceeds the cap")));
    }
    let mut k = lo.clone();
    let mut kv = DVector::zeros(nu);
    loop {
        for a in 0..nu {
            kv[a] = k[a] as f64;
        }
        f(&kv);
        let mut a = 0;
        loop {
            if a == nu {
                return Ok(());
            }
            k[a] += 1;
            if k[a] <= hi[a] {
                break;
            }
            k[a] = lo[a];
            a += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if q.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), found: v.len() });
        }
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("velocity has norm {}", v.norm())));
        }
        Ok(Self { q, v })
    }

    /// Normalizes `v` first.
    pub fn with_direction(q: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("velocity must be non-zero".into()));
        }
        Self::new(q, v / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub cylinder: usize,
    /// Coordinates of the hit copy's axis offset in the projected lattice of
    /// the cylinder (the original lattice coefficients for spherical ones).
    pub lattice_image: Vec<i64>,
    pub normal: DVector<f64>,
    /// Unfolded collision point.
    pub point: DVector<f64>,
    pub velocity_after: DVector<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowFlags {
    pub tangential: bool,
    pub simultaneous: bool,
    pub cascade_capped: bool,
    /// No collision for `stall_horizons` consecutive horizons while a
    /// collision count was requested.
    pub stalled: bool,
}

impl FlowFlags {
    pub fn degenerate(&self) -> bool {
        self.tangential || self.simultaneous || self.cascade_capped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub initial: PhasePoint,
    pub events: Vec<CollisionEvent>,
    pub symbolic: SymbolicSequence,
    pub flags: FlowFlags,
    /// Message of the error that stopped the flow early, if any.
    pub stop_error: Option<String>,
    pub final_time: f64,
    /// Unfolded state at `final_time`.
    pub final_phase: PhasePoint,
}

impl TrajectoryRecord {
    /// Unfolded position at time `t` (clamped to `[0, final_time]`).
    pub fn position_at(&self, t: f64) -> DVector<f64> {
        let t = t.clamp(0.0, self.final_time);
        let idx = self.events.partition_point(|e| e.time <= t);
        if idx == 0 {
            &self.initial.q + &self.initial.v * t
        } else {
            let e = &self.events[idx - 1];
            &e.point + &e.velocity_after * (t - e.time)
        }
    }

    /// Collided cylinder labels, sorted and deduplicated.
    pub fn collided(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.symbolic.labels().to_vec();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Prefix with the first `n` events.
    pub fn prefix(&self, n: usize) -> TrajectoryRecord {
        let n = n.min(self.events.len());
        let events = self.events[..n].to_vec();
        let symbolic = SymbolicSequence::from_labels(events.iter().map(|e| e.cylinder).collect());
        let (final_time, final_phase) = match events.last() {
            Some(e) => (e.time, PhasePoint { q: e.point.clone(), v: e.velocity_after.clone() }),
            None => (0.0, self.initial.clone()),
        };
        TrajectoryRecord {
            initial: self.initial.clone(),
            events,
            symbolic,
            flags: if n == self.events.len() { self.flags } else { FlowFlags::default() },
            stop_error: None,
            final_time,
            final_phase,
        }
    }

    /// The record as a Euclidean path: start, initial velocity and the
    /// absolute offsets of the hit copies.
    pub fn unfold(&self, geom: &TorusGeometry) -> Result<(SymbolicSequence, EuclideanPathSpec)> {
        let system = geom.system();
        let sigma = SymbolicSequence::new(self.symbolic.labels().to_vec(), system)?;
        let offsets: Vec<DVector<f64>> =
            self.events.iter().map(|e| geom.image_offset(e.cylinder, &e.lattice_image)).collect();
        let spec =
            EuclideanPathSpec::from_ambient(system, &sigma, self.initial.v.clone(), self.initial.q.clone(), &offsets)?;
        Ok((sigma, spec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_collisions: Option<usize>,
    pub max_time: Option<f64>,
}

impl StopRule {
    pub fn collisions(n: usize) -> Self {
        Self { max_collisions: Some(n), max_time: None }
    }

    pub fn time(t: f64) -> Self {
        Self { max_collisions: None, max_time: Some(t) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub tolerances: Tolerances,
    /// Search horizon; `None` uses ten fundamental-domain diameters.
    pub horizon: Option<f64>,
    /// Largest number of events allowed within one unit of time.
    pub cascade_cap: usize,
    pub stall_horizons: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), horizon: None, cascade_cap: 1_000_000, stall_horizons: 1000 }
    }
}

/// Wrapped position with its lattice shift: unfolded `q + B·shift`.
#[derive(Debug, Clone)]
pub(crate) struct FlowState {
    pub q: DVector<f64>,
    pub shift: Vec<i64>,
    pub v: DVector<f64>,
}

impl FlowState {
    pub(crate) fn from_phase(geom: &TorusGeometry, phase: &PhasePoint) -> Self {
        let (q, shift) = geom.system().lattice().wrap(&phase.q);
        Self { q, shift, v: phase.v.clone() }
    }

    pub(crate) fn unfolded(&self, geom: &TorusGeometry) -> DVector<f64> {
        &self.q + geom.system().lattice().lattice_point(&self.shift)
    }

    /// State moved by `dq` in position and `dv` in velocity (renormalized).
    pub(crate) fn displaced(&self, geom: &TorusGeometry, dq: &DVector<f64>, dv: &DVector<f64>) -> Self {
        let mut out = Self { q: &self.q + dq, shift: self.shift.clone(), v: (&self.v + dv).normalize() };
        out.rewrap(geom);
        out
    }

    /// Unfolded position difference `other − self`, exact in the lattice part.
    pub(crate) fn position_delta(&self, geom: &TorusGeometry, other: &FlowState) -> DVector<f64> {
        let ds: Vec<i64> = other.shift.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        (&other.q - &self.q) + geom.system().lattice().lattice_point(&ds)
    }

    fn rewrap(&mut self, geom: &TorusGeometry) {
        let (q, extra) = geom.system().lattice().wrap(&self.q);
        self.q = q;
        for (a, b) in self.shift.iter_mut().zip(extra) {
            *a += b;
        }
    }

    pub(crate) fn advance(&mut self, geom: &TorusGeometry, s: f64) {
        self.q.axpy(s, &self.v, 1.0);
        self.rewrap(geom);
    }
}

/// Next collision found from a wrapped state: time, cylinder, image in the
/// wrapped frame (reported coordinates) and normal.
#[derive(Debug, Clone)]
pub(crate) struct Hit {
    pub time: f64,
    pub cylinder: usize,
    pub image: Vec<i64>,
    pub normal: DVector<f64>,
}

struct Candidate {
    time: f64,
    cylinder: usize,
    kappa: DVector<f64>,
    tangential: bool,
}

pub(crate) fn next_hit(geom: &TorusGeometry, state: &FlowState, horizon: f64, tol: &Tolerances) -> Result<Option<Hit>> {
    if horizon <= 0.0 {
        return Ok(None);
    }
    let mut window = geom.diameter().min(horizon);
    loop {
        let mut cands: Vec<Candidate> = Vec::new();
        for (i, c) in geom.cylinders.iter().enumerate() {
            let y = c.base.transpose() * &state.q - &c.axis;
            let u = c.base.transpose() * &state.v;
            let uu = u.norm_squared();
            let r = c.radius;
            let half = 0.5 * window * uu.sqrt();
            let center = &y + &u * (0.5 * window);
            let reach = half + r + 1e-9 + tol.t_min_gap;
            let mut err = None;
            enumerate_box(c, &center, reach, |kappa| {
                if err.is_some() {
                    return;
                }
                let w = &y - &c.red * kappa;
                let ww = w.norm_squared();
                if ww < (r - tol.contact_tol).powi(2) {
                    err = Some(Error::StartInside { cylinder: i });
                    return;
                }
                if uu <= 1e-300 {
                    return;
                }
                let wu = w.dot(&u);
                if wu >= 0.0 {
                    // Moving away from this copy's axis.
                    return;
                }
                let disc = wu * wu - uu * (ww - r * r);
                if disc < 0.0 {
                    return;
                }
                if disc < tol.disc_tol * r * r * uu {
                    let t = -wu / uu;
                    if t <= window + tol.t_min_gap {
                        cands.push(Candidate { time: t, cylinder: i, kappa: kappa.clone(), tangential: true });
                    }
                    return;
                }
                let sq = disc.sqrt();
                let s = (ww - r * r) / (-wu + sq);
                if s <= window + tol.t_min_gap {
                    cands.push(Candidate { time: s, cylinder: i, kappa: kappa.clone(), tangential: false });
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
        }
        cands.sort_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(first) = cands.first() {
            if first.time <= window {
                if first.time <= tol.t_min_gap {
                    // Touching another copy at the current point.
                    return Err(Error::Simultaneous { first: first.cylinder, second: first.cylinder, time: first.time });
                }
                if first.tangential {
                    return Err(Error::Tangential { cylinder: first.cylinder, time: first.time });
                }
                if let Some(second) = cands.get(1) {
                    if second.time - first.time < tol.t_min_gap {
                        return Err(Error::Simultaneous {
                            first: first.cylinder,
                            second: second.cylinder,
                            time: first.time,
                        });
                    }
                }
                let c = &geom.cylinders[first.cylinder];
                let y = c.base.transpose() * &state.q - &c.axis;
                let u = c.base.transpose() * &state.v;
                let hit = &y + &u * first.time - &c.red * &first.kappa;
                let normal = &c.base * (&hit / hit.norm());
                let rep = &c.rep_inv * (&c.red * &first.kappa);
                let image = rep.iter().map(|x| x.round() as i64).collect();
                return Ok(Some(Hit { time: first.time, cylinder: first.cylinder, image, normal }));
            }
        }
        if window >= horizon {
            return Ok(None);
        }
        window = (2.0 * window).min(horizon);
    }
}

fn absolute_image(geom: &TorusGeometry, hit: &Hit, shift: &[i64]) -> Vec<i64> {
    let m = &geom.cylinders[hit.cylinder].lattice_to_rep;
    (0..m.nrows()).map(|a| hit.image[a] + (0..m.ncols()).map(|b| m[(a, b)] * shift[b]).sum::<i64>()).collect()
}

/// Flows `state` for exactly `duration`, returning `(time, cylinder, image)`
/// per event. Any degenerate event is an error.
pub(crate) fn run_for(
    geom: &TorusGeometry,
    state: &mut FlowState,
    duration: f64,
    config: &FlowConfig,
) -> Result<Vec<(f64, usize, Vec<i64>)>> {
    let horizon = config.horizon.unwrap_or_else(|| geom.default_horizon());
    let mut t = 0.0;
    let mut events = Vec::new();
    while t < duration {
        let h = horizon.min(duration - t);
        match next_hit(geom, state, h, &config.tolerances)? {
            None => {
                state.advance(geom, h);
                t += h;
            }
            Some(hit) => {
                let image = absolute_image(geom, &hit, &state.shift);
                state.advance(geom, hit.time);
                state.v = reflect(&state.v, &hit.normal);
                t += hit.time;
                events.push((t, hit.cylinder, image));
            }
        }
    }
    Ok(events)
}

/// First collision of the straight motion from `phase` within `horizon`.
pub fn next_collision(
    geom: &TorusGeometry,
    phase: &PhasePoint,
    horizon: f64,
    tol: &Tolerances,
) -> Result<Option<CollisionEvent>> {
    let state = FlowState::from_phase(geom, phase);
    Ok(next_hit(geom, &state, horizon, tol)?.map(|hit| {
        let point = &phase.q + &phase.v * hit.time;
        CollisionEvent {
            time: hit.time,
            cylinder: hit.cylinder,
            lattice_image: absolute_image(geom, &hit, &state.shift),
            velocity_after: reflect(&phase.v, &hit.normal),
            normal: hit.normal,
            point,
        }
    }))
}

/// Runs the billiard flow until the stop rule fires or a degenerate event
/// (tangency, simultaneous collision, event cascade) ends it; degenerate
/// stops are reported in the record's flags.
pub fn flow(geom: &TorusGeometry, phase: &PhasePoint, stop: StopRule, config: &FlowConfig) -> Result<TrajectoryRecord> {
    if stop.max_collisions.is_none() && stop.max_time.is_none() {
        return Err(Error::InvalidInput("flow needs a collision or time limit".into()));
    }
    if phase.q.len() != geom.dim() {
        return Err(Error::DimensionMismatch { expected: geom.dim(), found: phase.q.len() });
    }
    PhasePoint::new(phase.q.clone(), phase.v.clone())?;
    let tol = config.tolerances;
    let horizon = config.horizon.unwrap_or_else(|| geom.default_horizon());
    let mut state = FlowState::from_phase(geom, phase);
    let mut t = 0.0;
    let mut events: Vec<CollisionEvent> = Vec::new();
    let mut flags = FlowFlags::default();
    let mut stop_error = None;
    let mut recent: VecDeque<f64> = VecDeque::new();
    let mut empty = 0usize;
    loop {
        if stop.max_collisions.is_some_and(|n| events.len() >= n) {
            break;
        }
        let remaining = stop.max_time.map_or(f64::INFINITY, |m| m - t);
        if remaining <= 0.0 {
            break;
        }
        let h = horizon.min(remaining);
        let hit = match next_hit(geom, &state, h, &tol) {
            Ok(hit) => hit,
            Err(e @ Error::StartInside { .. }) if events.is_empty() => return Err(e),
            Err(e) => {
                match e {
                    Error::Tangential { .. } => flags.tangential = true,
                    Error::Simultaneous { .. } => flags.simultaneous = true,
                    _ => {}
                }
                if !flags.degenerate() {
                    return Err(e);
                }
                stop_error = Some(e.to_string());
                break;
            }
        };
        match hit {
            None => {
                state.advance(geom, h);
                t += h;
                if stop.max_time.is_none() {
                    empty += 1;
                    if empty >= config.stall_horizons {
                        flags.stalled = true;
                        break;
                    }
                }
            }
            Some(hit) => {
                empty = 0;
                let image = absolute_image(geom, &hit, &state.shift);
                state.advance(geom, hit.time);
                t += hit.time;
                state.v = reflect(&state.v, &hit.normal);
                events.push(CollisionEvent {
                    time: t,
                    cylinder: hit.cylinder,
                    lattice_image: image,
                    normal: hit.normal,
                    point: state.unfolded(geom),
                    velocity_after: state.v.clone(),
                });
                recent.push_back(t);
                while recent.front().is_some_and(|&s| s <= t - 1.0) {
                    recent.pop_front();
                }
                if recent.len() > config.cascade_cap {
                    flags.cascade_capped = true;
                    stop_error = Some(format!("more than {} events within one time unit", config.cascade_cap));
                    break;
                }
            }
        }
    }
    let symbolic = SymbolicSequence::from_labels(events.iter().map(|e| e.cylinder).collect());
    let final_phase = PhasePoint { q: state.unfolded(geom), v: state.v.clone() };
    Ok(TrajectoryRecord { initial: phase.clone(), events, symbolic, flags, stop_error, final_time: t, final_phase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Lattice;
    use crate::system::{CylinderSpec, Generator};
    use nalgebra::dvector;

    pub(crate) fn sinai(r: f64) -> TorusGeometry {
        let s = CylindricBilliardSystem::new(
            Lattice::integer(2),
            vec![CylinderSpec::new(Generator::point(), r, vec![0.5, 0.5])],
        )
        .unwrap();
        TorusGeometry::new(&s).unwrap()
    }

    #[test]
    fn head_on_collision() {
        let g = sinai(0.3);
        let p = PhasePoint::new(dvector![0.0, 0.5], dvector![1.0, 0.0]).unwrap();
        let e = next_collision(&g, &p, 10.0, &Tolerances::default()).unwrap().unwrap();
        assert!((e.time - 0.2).abs() < 1e-14);
        assert_eq!(e.lattice_image, vec![0, 0]);
        assert!((e.normal - dvector![-1.0, 0.0]).norm() < 1e-14);
    }

    #[test]
    fn collision_with_neighbouring_copy() {
        let g = sinai(0.3);
        let p = PhasePoint::new(dvector![0.5, 0.9], dvector![0.0, 1.0]).unwrap();
        let e = next_collision(&g, &p, 10.0, &Tolerances::default()).unwrap().unwrap();
        assert!((e.time - 0.3).abs() < 1e-14);
        assert_eq!(e.lattice_image, vec![0, 1]);
        // The line x = 0 stays 0.5 away from every centre.
        let p = PhasePoint::new(dvector![0.0, 0.5], dvector![0.0, 1.0]).unwrap();
        assert!(next_collision(&g, &p, 50.0, &Tolerances::default()).unwrap().is_none());
    }

    #[test]
    fn start_inside_is_reported() {
        let g = sinai(0.3);
        let p = PhasePoint::new(dvector![0.5, 0.6], dvector![1.0, 0.0]).unwrap();
        assert!(matches!(next_collision(&g, &p, 10.0, &Tolerances::default()), Err(Error::StartInside { .. })));
    }

    #[test]
    fn free_flight_corridor() {
        let g = sinai(0.3);
        let p = PhasePoint::new(dvector![0.1, 0.0], dvector![0.0, 1.0]).unwrap();
        let rec = flow(&g, &p, StopRule::time(100.0), &FlowConfig::default()).unwrap();
        assert!(rec.events.is_empty());
        assert!((rec.final_phase.q.clone() - dvector![0.1, 100.0]).norm() < 1e-9);
    }

    #[test]
    fn images_are_absolute_after_wrapping() {
        let g = sinai(0.3);
        let p = PhasePoint::new(dvector![3.5, -1.1], dvector![0.0, 1.0]).unwrap();
        let e = next_collision(&g, &p, 10.0, &Tolerances::default()).unwrap().unwrap();
        assert_eq!(e.lattice_image, vec![3, -1]);
        assert!((e.time - 0.3).abs() < 1e-12);
    }
}
