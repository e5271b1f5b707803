use std::collections::BTreeMap;
use std::path::Path;

use cylbill_core::builders::{direct_sum_system, hard_ball_system, sub_billiard, HardBallParams};
use cylbill_core::classifier::{commutant_dimension, is_transitive, is_transverse, non_orthogonality_graph, Part};
use cylbill_core::config::Tolerances;
use cylbill_core::euclid::{
    delta_sigma, neutral_space, theta_rank, trace, w_plus, w_plus_tilde, DeltaReport, SamplingConfig, SamplingMeasure,
    SymbolicSequence,
};
use cylbill_core::exec::Exec;
use cylbill_core::flow::{
    flow, lyapunov_ensemble, lyapunov_max, random_phase, splitting_scan, FlowConfig, LyapunovConfig, LyapunovReport,
    PhasePoint, StopRule, TorusGeometry,
};
use cylbill_core::geometry::Subspace;
use cylbill_core::io::{self, PathResultFile, SigmaFile};
use cylbill_core::rng::{task_rng, GENERATOR_NAME};
use cylbill_core::system::CylindricBilliardSystem;
use nalgebra::DVector;
use serde::Serialize;

use crate::cli::{Build, Command, DeltaArgs, GlobalOpts, InitArgs, Measure};
use crate::CliError;

/// Machine-readable JSON followed by `# `-prefixed summary lines.
pub struct Report {
    pub json: String,
    pub footer: Vec<String>,
    /// Exit status for a successful run (1 for a sequence that is not rich).
    pub status: i32,
}

impl Report {
    fn new<T: Serialize>(value: &T, footer: Vec<String>) -> Result<Self, CliError> {
        Ok(Self { json: io::to_json_string(value)?, footer, status: 0 })
    }
}

pub struct Ctx {
    pub tol: Tolerances,
    pub exec: Exec,
}

impl Ctx {
    pub fn new(g: &GlobalOpts) -> Self {
        let mut tol = Tolerances::default();
        if let Some(x) = g.tol_rank {
            tol.tol_rank = x;
        }
        if let Some(x) = g.disc_tol {
            tol.disc_tol = x;
        }
        if let Some(x) = g.t_min_gap {
            tol.t_min_gap = x;
        }
        if let Some(x) = g.fd_step {
            tol.fd_step = x;
        }
        Self { tol, exec: if g.sequential { Exec::Sequential } else { Exec::Parallel } }
    }

    fn flow_config(&self, horizon: Option<f64>) -> FlowConfig {
        FlowConfig { tolerances: self.tol, horizon, ..Default::default() }
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn load_system(path: &Path) -> Result<CylindricBilliardSystem, CliError> {
    let system = io::read_system(path)?;
    let report = system.validate();
    if !report.is_valid() {
        return Err(CliError::Validation(format!("{}: {report}", path.display())));
    }
    Ok(system)
}

fn load_sigma(path: &Path, system: &CylindricBilliardSystem) -> Result<SymbolicSequence, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if let Ok(f) = io::from_json_str::<SigmaFile>(&text) {
        if f.labels.is_empty() {
            return Err(CliError::Usage(format!("{}: the symbolic sequence is empty", path.display())));
        }
    }
    Ok(io::read_sigma(path, system)?)
}

fn emit_file(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn start_point(geom: &TorusGeometry, init: &InitArgs) -> Result<PhasePoint, CliError> {
    match (&init.start.init, init.seed) {
        (Some(path), _) => Ok(io::read_phase(path, geom.dim())?),
        (None, Some(seed)) => Ok(random_phase(geom, &mut task_rng(seed, 0))?),
        (None, None) => Err(CliError::Usage("--random needs --seed".into())),
    }
}

pub fn run(command: &Command, ctx: &Ctx) -> Result<Option<Report>, CliError> {
    match command {
        Command::Classify { system } => classify(&load_system(system)?, ctx).map(Some),
        Command::Build(b) => build(b).map(|()| None),
        Command::Delta(a) => delta(a, ctx, false).map(Some),
        Command::Rich(a) => delta(a, ctx, true).map(Some),
        Command::Trace { system, sigma, spec, ranks } => trace_path(system, sigma, spec, *ranks, ctx).map(Some),
        Command::Simulate { system, init, collisions, time, horizon, output, csv } => {
            let stop = match (collisions, time) {
                (Some(n), _) => StopRule::collisions(*n),
                (None, Some(t)) => StopRule::time(*t),
                (None, None) => return Err(CliError::Usage("give --collisions or --time".into())),
            };
            simulate(system, init, stop, *horizon, output.as_deref(), csv.as_deref(), ctx).map(Some)
        }
        Command::Lyapunov { system, init, total_time, renorm_dt, d0, runs, windows } => {
            let seed = init.seed.ok_or_else(|| CliError::Usage("lyapunov needs --seed".into()))?;
            let cfg = LyapunovConfig {
                total_time: *total_time,
                renorm_dt: *renorm_dt,
                d0: *d0,
                seed,
                flow: ctx.flow_config(None),
                ..Default::default()
            };
            lyapunov(system, init, &cfg, *runs, *windows, ctx).map(Some)
        }
        Command::SplittingScan { system, orbits, collisions, checkpoints, seed } => {
            let system = load_system(system)?;
            let geom = TorusGeometry::new(&system)?;
            let r = splitting_scan(&geom, *orbits, *collisions, checkpoints, *seed, &ctx.flow_config(None), ctx.exec)?;
            let mut footer: Vec<String> = r
                .checkpoints
                .iter()
                .zip(&r.fractions)
                .map(|(c, f)| format!("# split fraction after {c} collisions: {f:.4}"))
                .collect();
            footer.push(format!("# degenerate orbits: {}; short orbits: {}", r.degenerate_orbits, r.short_orbits));
            Report::new(&r, footer).map(Some)
        }
    }
}

#[derive(Serialize)]
struct WitnessReport {
    b1_dim: usize,
    b2_dim: usize,
    b1_basis: Vec<Vec<f64>>,
    b2_basis: Vec<Vec<f64>>,
    b1_cylinders: Vec<usize>,
    b2_cylinders: Vec<usize>,
}

#[derive(Serialize)]
struct ClassifyReport {
    dim: usize,
    cylinders: usize,
    transitive: bool,
    witness: Option<WitnessReport>,
    transverse: bool,
    counterexample: Option<Vec<usize>>,
    commutant_dimension: usize,
    components: Vec<Vec<usize>>,
}

fn rows(s: &Subspace) -> Vec<Vec<f64>> {
    s.basis_vectors().iter().map(|v| v.iter().copied().collect()).collect()
}

fn classify(system: &CylindricBilliardSystem, ctx: &Ctx) -> Result<Report, CliError> {
    let d = system.dim();
    let bases = system.base_spaces();
    let t = is_transitive(d, bases)?;
    let tv = is_transverse(system, ctx.exec)?;
    let witness = t.witness.as_ref().map(|w| {
        let part = |p: Part| w.assignment.iter().filter(|&(_, &q)| q == p).map(|(&i, _)| i).collect();
        WitnessReport {
            b1_dim: w.b1.dim(),
            b2_dim: w.b2.dim(),
            b1_basis: rows(&w.b1),
            b2_basis: rows(&w.b2),
            b1_cylinders: part(Part::B1),
            b2_cylinders: part(Part::B2),
        }
    });
    let r = ClassifyReport {
        dim: d,
        cylinders: system.num_cylinders(),
        transitive: t.transitive,
        witness,
        transverse: tv.transverse,
        counterexample: tv.counterexample.clone(),
        commutant_dimension: commutant_dimension(d, bases)?,
        components: non_orthogonality_graph(bases)?.components(),
    };
    let mut footer = vec![format!("# transitive: {}; transverse: {}", yes(r.transitive), yes(r.transverse))];
    if let Some(w) = &r.witness {
        footer.push(format!(
            "# splitting: dim B1 = {} (cylinders {:?}), dim B2 = {} (cylinders {:?})",
            w.b1_dim, w.b1_cylinders, w.b2_dim, w.b2_cylinders
        ));
    }
    if let Some(c) = &r.counterexample {
        footer.push(format!("# transverseness fails for cylinders {c:?}"));
    }
    Report::new(&r, footer)
}

fn parse_vectors(s: &str, d: usize) -> Result<Vec<DVector<f64>>, CliError> {
    s.split(';')
        .map(|v| {
            let xs = v
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad number {x:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if xs.len() != d {
                return Err(CliError::Usage(format!("vector {v:?} has {} entries, expected {d}", xs.len())));
            }
            Ok(DVector::from_vec(xs))
        })
        .collect()
}

fn build(b: &Build) -> Result<(), CliError> {
    match b {
        Build::Hardball { n, nu, masses, r, output } => {
            let masses = masses.clone().unwrap_or_else(|| vec![1.0; *n]);
            let built = hard_ball_system(&HardBallParams { n: *n, nu: *nu, masses, r: *r })?;
            emit_file(output.as_deref(), &io::system_to_string(&built.system)?)
        }
        Build::Directsum { dim, blocks, radii, translations, output } => {
            let bases = blocks
                .iter()
                .map(|b| Ok(Subspace::orthonormalize(*dim, &parse_vectors(b, *dim)?)?))
                .collect::<Result<Vec<_>, CliError>>()?;
            let translations = match translations {
                Some(t) => parse_vectors(t, *dim)?,
                None => vec![DVector::zeros(*dim); bases.len()],
            };
            let built = direct_sum_system(&bases, radii, &translations)?;
            emit_file(output.as_deref(), &io::system_to_string(&built.system)?)
        }
        Build::Subbilliard { system, indices, output } => {
            let sb = sub_billiard(&load_system(system)?, indices)?;
            for note in &sb.notes {
                eprintln!("# note: {note}");
            }
            emit_file(output.as_deref(), &io::system_to_string(&sb.system)?)
        }
    }
}

#[derive(Serialize)]
struct DeltaOutput<'a> {
    #[serde(flatten)]
    report: &'a DeltaReport,
    samples: usize,
    seed: u64,
    rich: bool,
}

fn delta(a: &DeltaArgs, ctx: &Ctx, rich_status: bool) -> Result<Report, CliError> {
    let system = load_system(&a.system)?;
    let sigma = load_sigma(&a.sigma, &system)?;
    let measure = match a.measure {
        Measure::Box => SamplingMeasure::Box { half_width: a.box_half_width },
        Measure::Constructive => SamplingMeasure::constructive(),
    };
    let cfg = SamplingConfig { measure, max_attempts: a.max_attempts, tolerances: ctx.tol, exec: ctx.exec, ..Default::default() };
    let r = delta_sigma(&system, &sigma, a.samples, a.seed, &cfg)?;
    let out = DeltaOutput { report: &r, samples: a.samples, seed: a.seed, rich: r.is_rich() };
    let footer = vec![
        format!("# delta = {}, d - 1 = {}, bound = {}, gamma dim = {}", r.delta, r.d_minus_1, r.bound, r.gamma_dim),
        format!("# rich: {}", yes(r.is_rich())),
        format!("# failed samples: {} of {}; rejected draws: {}", r.failed_samples(), a.samples, r.rejected_draws),
    ];
    let mut report = Report::new(&out, footer)?;
    if rich_status && !r.is_rich() {
        report.status = 1;
    }
    Ok(report)
}

#[derive(Serialize)]
struct Ranks {
    w_plus_dim: usize,
    w_plus_tilde_dim: usize,
    neutral_dim: usize,
    neutral_residual: f64,
    theta_rank: usize,
    theta_full_rank: usize,
}

#[derive(Serialize)]
struct TraceReport {
    #[serde(flatten)]
    path: PathResultFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    ranks: Option<Ranks>,
}

fn trace_path(system: &Path, sigma: &Path, spec: &Path, ranks: bool, ctx: &Ctx) -> Result<Report, CliError> {
    let system = load_system(system)?;
    let sigma = load_sigma(sigma, &system)?;
    let spec = io::read_spec(spec, &system, &sigma)?;
    let path = trace(&system, &sigma, &spec, &ctx.tol)?;
    let mut footer = vec![format!(
        "# {} collisions, last at t = {:.6}",
        path.times.len(),
        path.times.last().copied().unwrap_or(0.0)
    )];
    let ranks = if ranks {
        let ns = neutral_space(&system, &sigma, &spec, &ctx.tol)?;
        let th = theta_rank(&system, &sigma, &spec, &ctx.tol)?;
        let r = Ranks {
            w_plus_dim: w_plus(&system, &sigma, &spec, &ctx.tol)?.dim(),
            w_plus_tilde_dim: w_plus_tilde(&system, &sigma, &spec, &ctx.tol)?.dim(),
            neutral_dim: ns.kernel.dim(),
            neutral_residual: ns.residual,
            theta_rank: th.rank,
            theta_full_rank: th.full,
        };
        footer.push(format!("# dim W+ = {}, dim W~+ = {}, neutral dim = {}", r.w_plus_dim, r.w_plus_tilde_dim, r.neutral_dim));
        Some(r)
    } else {
        None
    };
    Report::new(&TraceReport { path: PathResultFile::new(&sigma, &path), ranks }, footer)
}

#[derive(Serialize)]
struct SimulateReport {
    collisions: usize,
    final_time: f64,
    cylinder_counts: BTreeMap<usize, usize>,
    flags: cylbill_core::flow::FlowFlags,
    stop_error: Option<String>,
    final_q: Vec<f64>,
    final_v: Vec<f64>,
}

fn simulate(
    system: &Path,
    init: &InitArgs,
    stop: StopRule,
    horizon: Option<f64>,
    output: Option<&Path>,
    csv: Option<&Path>,
    ctx: &Ctx,
) -> Result<Report, CliError> {
    let system = load_system(system)?;
    let geom = TorusGeometry::new(&system)?;
    let phase = start_point(&geom, init)?;
    let rec = flow(&geom, &phase, stop, &ctx.flow_config(horizon))?;
    if let Some(p) = output {
        emit_file(Some(p), &io::trajectory_to_string(&rec)?)?;
    }
    if let Some(p) = csv {
        emit_file(Some(p), &io::trajectory_to_csv(&rec)?)?;
    }
    let mut cylinder_counts = BTreeMap::new();
    for e in &rec.events {
        *cylinder_counts.entry(e.cylinder).or_insert(0) += 1;
    }
    let r = SimulateReport {
        collisions: rec.events.len(),
        final_time: rec.final_time,
        cylinder_counts,
        flags: rec.flags,
        stop_error: rec.stop_error.clone(),
        final_q: rec.final_phase.q.iter().copied().collect(),
        final_v: rec.final_phase.v.iter().copied().collect(),
    };
    let mut footer = vec![format!("# {} collisions up to t = {:.6}", r.collisions, r.final_time)];
    if let Some(e) = &r.stop_error {
        footer.push(format!("# stopped early: {e}"));
    }
    let mut report = Report::new(&r, footer)?;
    if rec.flags.degenerate() {
        report.status = crate::EXIT_DEGENERATE;
    }
    Ok(report)
}

#[derive(Serialize)]
struct LyapunovOutput {
    generator: &'static str,
    runs: Vec<LyapunovReport>,
}

fn lyapunov(
    system: &Path,
    init: &InitArgs,
    cfg: &LyapunovConfig,
    runs: usize,
    windows: bool,
    ctx: &Ctx,
) -> Result<Report, CliError> {
    let system = load_system(system)?;
    let geom = TorusGeometry::new(&system)?;
    let mut reports = if init.start.random {
        lyapunov_ensemble(&geom, runs, cfg, ctx.exec)?
    } else {
        vec![lyapunov_max(&geom, &start_point(&geom, init)?, cfg)?]
    };
    let footer = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "# run {i}: estimate {:.6} +- {:.6} ({} of {} windows discarded{})",
                r.estimate,
                r.standard_error,
                r.discarded,
                r.windows.len(),
                if r.unreliable { ", unreliable" } else { "" }
            )
        })
        .collect();
    if !windows {
        for r in &mut reports {
            r.windows.clear();
        }
    }
    Report::new(&LyapunovOutput { generator: GENERATOR_NAME, runs: reports }, footer)
}
