mod common;

use common::random_system;
use cylbill_core::builders::{hard_ball_system, sub_billiard, HardBallParams};
use cylbill_core::exec::Exec;
use cylbill_core::flow::{
    flow, random_phase, splitting_scan, FlowConfig, PhasePoint, StopRule, TorusGeometry, TrajectoryRecord,
};
use cylbill_core::geometry::Lattice;
use cylbill_core::rng::{task_rng, TaskRng};
use cylbill_core::system::{CylinderSpec, CylindricBilliardSystem, Generator};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

/// Sheared Sinai table, a hard-ball system with random masses, or a random
/// valid system.
fn random_table(rng: &mut TaskRng) -> CylindricBilliardSystem {
    match rng.random_range(0..3) {
        0 => {
            let s = rng.random_range(-0.3..0.3);
            let lattice = Lattice::new(nalgebra::dmatrix![1.0, s; 0.0, 1.0]).unwrap();
            let r = rng.random_range(0.1..0.4);
            CylindricBilliardSystem::new(lattice, vec![CylinderSpec::new(Generator::point(), r, vec![0.5, 0.5])]).unwrap()
        }
        1 => {
            let n = rng.random_range(2..=3);
            let masses = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            hard_ball_system(&HardBallParams { n, nu: 2, masses, r: 0.1 }).unwrap().system
        }
        _ => loop {
            let s = random_system(rng);
            if s.validate().is_valid() {
                return s;
            }
        },
    }
}

fn random_record(seed: u64) -> Option<(TorusGeometry, TrajectoryRecord)> {
    let mut rng = task_rng(seed, 0);
    let system = random_table(&mut rng);
    let geom = TorusGeometry::new(&system).ok()?;
    let phase = random_phase(&geom, &mut rng).ok()?;
    let rec = flow(&geom, &phase, StopRule::time(30.0), &FlowConfig::default()).ok()?;
    Some((geom, rec))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn events_are_specular_and_keep_speed(seed in any::<u64>()) {
        let Some((geom, rec)) = random_record(seed) else { return Ok(()) };
        let system = geom.system();
        let mut v_pre = rec.initial.v.clone();
        let mut last = 0.0;
        let labels: Vec<usize> = rec.events.iter().map(|e| e.cylinder).collect();
        prop_assert_eq!(rec.symbolic.labels(), labels.as_slice());
        for e in &rec.events {
            prop_assert!(e.time > last);
            last = e.time;
            let v_post = &e.velocity_after;
            prop_assert!((v_post.norm() - 1.0).abs() < 1e-12);
            let a = system.generator_space(e.cylinder).unwrap();
            prop_assert!(a.project(&e.normal).unwrap().norm() < 1e-10);
            prop_assert!(system.base_space(e.cylinder).unwrap().residual(&(v_post - &v_pre)) < 1e-10);
            prop_assert!((v_post.dot(&e.normal) + v_pre.dot(&e.normal)).abs() < 1e-12);
            v_pre = v_post.clone();
        }
    }

    #[test]
    fn orbits_never_enter_a_cylinder(seed in any::<u64>()) {
        let Some((geom, rec)) = random_record(seed) else { return Ok(()) };
        let mut rng = task_rng(seed, 1);
        for _ in 0..1000 {
            let t = rng.random_range(0.0..=rec.final_time);
            let (_, gap) = geom.clearance(&rec.position_at(t));
            prop_assert!(gap >= -1e-9, "penetration {} at t = {}", gap, t);
        }
    }

    #[test]
    fn flows_are_deterministic(seed in any::<u64>()) {
        let a = random_record(seed).map(|(_, r)| r);
        let b = random_record(seed).map(|(_, r)| r);
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// A factor built from every cylinder sharing one lattice generator sees
    /// the projection of the original orbit, run at the projected speed.
    #[test]
    fn sub_billiard_follows_the_projected_orbit(seed in any::<u64>()) {
        let mut rng = task_rng(seed, 0);
        let g: Vec<i64> = loop {
            let g: Vec<i64> = (0..3).map(|_| rng.random_range(-1..=1)).collect();
            if g.iter().any(|&x| x != 0) {
                break g;
            }
        };
        let k = rng.random_range(1..=2);
        let cylinders = (0..k)
            .map(|_| {
                let t = (0..3).map(|_| rng.random::<f64>()).collect();
                CylinderSpec::new(Generator::Lattice(vec![g.clone()]), rng.random_range(0.1..0.2), t)
            })
            .collect();
        let Ok(system) = CylindricBilliardSystem::new(Lattice::integer(3), cylinders) else { return Ok(()) };
        let sb = sub_billiard(&system, &(0..k).collect::<Vec<_>>()).unwrap();
        let geom = TorusGeometry::new(&system).unwrap();
        let factor = TorusGeometry::new(&sb.system).unwrap();
        let Ok(phase) = random_phase(&geom, &mut rng) else { return Ok(()) };
        let b = sb.e_plus.basis();
        let pv = b.transpose() * &phase.v;
        let speed = pv.norm();
        prop_assume!(speed > 0.2);
        let fphase = PhasePoint::new(b.transpose() * &phase.q, &pv / speed).unwrap();
        let cfg = FlowConfig::default();
        let rec = flow(&geom, &phase, StopRule::collisions(6), &cfg).unwrap();
        let frec = flow(&factor, &fphase, StopRule::collisions(6), &cfg).unwrap();
        prop_assert_eq!(rec.events.len(), frec.events.len());
        for (j, (e, f)) in rec.events.iter().zip(&frec.events).enumerate() {
            prop_assert_eq!(sb.indices[f.cylinder], e.cylinder);
            let tol = 1e-10 * 100f64.powi(j as i32);
            prop_assert!((b.transpose() * &e.point - &f.point).norm() < tol);
            prop_assert!((e.time * speed - f.time).abs() < tol);
        }
    }

    #[test]
    fn splitting_scans_do_not_depend_on_exec_mode(seed in any::<u64>()) {
        let b = hard_ball_system(&HardBallParams::equal_masses(3, 2, 0.2)).unwrap();
        let geom = TorusGeometry::new(&b.system).unwrap();
        let cfg = FlowConfig::default();
        let seq = splitting_scan(&geom, 8, 12, &[3, 6], seed, &cfg, Exec::Sequential).unwrap();
        let par = splitting_scan(&geom, 8, 12, &[3, 6], seed, &cfg, Exec::Parallel).unwrap();
        prop_assert_eq!(seq, par);
    }
}

#[test]
fn product_orbit_stays_in_its_block() {
    let lattice = Lattice::integer(4);
    let first = CylinderSpec::new(Generator::Lattice(vec![vec![0, 0, 1, 0], vec![0, 0, 0, 1]]), 0.2, vec![0.5; 4]);
    let second = CylinderSpec::new(Generator::Lattice(vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0]]), 0.2, vec![0.5; 4]);
    let system = CylindricBilliardSystem::new(lattice, vec![first, second]).unwrap();
    let geom = TorusGeometry::new(&system).unwrap();
    let q = DVector::from_row_slice(&[0.1, 0.05, 0.1, 0.1]);
    let v = DVector::from_row_slice(&[0.6, 0.8, 0.0, 0.0]);
    let rec = flow(&geom, &PhasePoint::new(q, v).unwrap(), StopRule::collisions(50), &FlowConfig::default()).unwrap();
    assert_eq!(rec.events.len(), 50);
    assert!(rec.events.iter().all(|e| e.cylinder == 0));
    assert!(rec.final_phase.v.rows(2, 2).norm() < 1e-15);
}
