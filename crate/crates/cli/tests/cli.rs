use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cylbill(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylbill")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// JSON part of a report (everything before the `# ` footer).
fn report(o: &Output) -> Value {
    let text = stdout(o);
    let json: String = text.lines().filter(|l| !l.starts_with("# ")).collect::<Vec<_>>().join("\n");
    serde_json::from_str(&json).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn sigma(dir: &Path, name: &str, labels: &[usize]) -> PathBuf {
    write(dir, name, &format!(r#"{{"format": "cylbill-sigma", "version": 1, "labels": {labels:?}}}"#))
}

const SINAI: &str = r#"{
  "format": "cylbill-system",
  "version": 1,
  "dim": 2,
  "lattice_basis": [[1.0, 0.0], [0.0, 1.0]],
  "cylinders": [{"generator_coeffs": [], "radius": 0.3, "translation": [0.5, 0.5]}]
}"#;

fn product(dir: &Path) -> PathBuf {
    let o = cylbill(
        &[
            "build", "directsum", "--dim", "4", "--block", "1,0,0,0;0,1,0,0", "--block", "0,0,1,0;0,0,0,1", "--radii",
            "0.2,0.2", "--translations", "0.5,0.5,0,0;0,0,0.5,0.5", "-o", "product.json",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("product.json")
}

#[test]
fn three_hard_balls_are_transitive_and_transverse() {
    let dir = TempDir::new().unwrap();
    let o = cylbill(&["build", "hardball", "--n", "3", "--nu", "2", "--r", "0.1", "-o", "hb.json"], dir.path());
    assert!(o.status.success());
    let o = cylbill(&["classify", "hb.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# transitive: yes; transverse: yes"));
    let r = report(&o);
    assert_eq!(r["commutant_dimension"], 1);
    assert_eq!(r["components"].as_array().unwrap().len(), 1);
}

#[test]
fn orthogonal_blocks_are_reported_with_a_witness() {
    let dir = TempDir::new().unwrap();
    product(dir.path());
    let o = cylbill(&["classify", "product.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# transitive: no"));
    let r = report(&o);
    assert_eq!(r["witness"]["b1_dim"], 2);
    assert_eq!(r["witness"]["b2_dim"], 2);
    assert_eq!(r["commutant_dimension"], 2);
}

#[test]
fn malformed_files_fail_validation_with_a_location() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.json", "{\n  \"format\": \"cylbill-system\",\n  \"version\": 1,\n  \"dim\": \"two\"\n}");
    let o = cylbill(&["classify", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = cylbill(&["classify", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_ball_radius() {
    let dir = TempDir::new().unwrap();
    let o = cylbill(&["build", "hardball", "--n", "2", "--nu", "2", "--masses", "1,1", "--r", "0.1"], dir.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dim"], 2);
    let r = v["cylinders"][0]["radius"].as_f64().unwrap();
    assert!((r - 0.1 * 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn one_pair_of_three_balls_matches_two_balls() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert!(cylbill(&["build", "hardball", "--n", "3", "--nu", "2", "--r", "0.1", "-o", "hb3.json"], p).status.success());
    assert!(cylbill(&["build", "hardball", "--n", "2", "--nu", "2", "--r", "0.1", "-o", "hb2.json"], p).status.success());
    let o = cylbill(&["build", "subbilliard", "hb3.json", "--indices", "0", "-o", "pair.json"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let load = |name: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(p.join(name)).unwrap()).unwrap() };
    let (pair, two) = (load("pair.json"), load("hb2.json"));
    assert_eq!(pair["dim"], two["dim"]);
    let radius = |v: &Value| v["cylinders"][0]["radius"].as_f64().unwrap();
    assert!((radius(&pair) - radius(&two)).abs() < 1e-14);
    let gram = |v: &Value| {
        let b: Vec<Vec<f64>> = serde_json::from_value(v["lattice_basis"].clone()).unwrap();
        let col = |j: usize| [b[0][j], b[1][j]];
        let (c0, c1) = (col(0), col(1));
        let det = (c0[0] * c1[1] - c0[1] * c1[0]).abs();
        let mut norms = [c0[0].hypot(c0[1]), c1[0].hypot(c1[1])];
        norms.sort_by(f64::total_cmp);
        (det, norms)
    };
    let (dp, np) = gram(&pair);
    let (dt, nt) = gram(&two);
    assert!((dp - dt).abs() < 1e-12);
    assert!((np[0] - nt[0]).abs() < 1e-12 && (np[1] - nt[1]).abs() < 1e-12);
}

#[test]
fn richness_reports_and_exit_statuses() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(p, "sinai.json", SINAI);
    sigma(p, "one.json", &[0]);
    let o = cylbill(&["rich", "sinai.json", "one.json", "--samples", "8", "--seed", "3"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["delta"], 1);
    assert_eq!(r["rich"], true);

    product(p);
    sigma(p, "block.json", &[0, 0, 0]);
    let o = cylbill(&["rich", "product.json", "block.json", "--samples", "8", "--seed", "3"], p);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["rich"], false);
    assert_eq!(r["bound"], 1);

    sigma(p, "empty.json", &[]);
    let o = cylbill(&["rich", "sinai.json", "empty.json", "--seed", "3"], p);
    assert_eq!(o.status.code(), Some(4));
    let o = cylbill(&["delta", "sinai.json", "one.json"], p);
    assert_eq!(o.status.code(), Some(4), "seed is required");
}

#[test]
fn delta_reports_are_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert!(cylbill(&["build", "hardball", "--n", "3", "--nu", "2", "--r", "0.1", "-o", "hb.json"], p).status.success());
    sigma(p, "s.json", &[0, 1, 2, 0]);
    let args = ["delta", "hb.json", "s.json", "--samples", "6", "--seed", "9", "--measure", "constructive"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cylbill")).args(args).current_dir(p).env("CYLBILL_THREADS", threads).output().unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["delta"], 3);
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn simulate_writes_trajectories_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(p, "sinai.json", SINAI);
    let args = ["simulate", "sinai.json", "--random", "--seed", "5", "--collisions", "100", "-o", "t.json", "--csv", "t.csv"];
    let first = cylbill(&args, p);
    assert!(first.status.success(), "{}", stderr(&first));
    let traj = std::fs::read_to_string(p.join("t.json")).unwrap();
    let again = cylbill(&args, p);
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(std::fs::read_to_string(p.join("t.json")).unwrap(), traj);
    let v: Value = serde_json::from_str(&traj).unwrap();
    assert_eq!(v["events"].as_array().unwrap().len(), 100);
    let csv = std::fs::read_to_string(p.join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with("time,cylinder,image_0,image_1,point_0"));
    assert_eq!(report(&first)["collisions"], 100);

    write(p, "inside.json", r#"{"format": "cylbill-phase", "version": 1, "q": [0.5, 0.5], "v": [1.0, 0.0]}"#);
    let o = cylbill(&["simulate", "sinai.json", "--init", "inside.json", "--collisions", "5"], p);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = cylbill(&["simulate", "sinai.json", "--random", "--collisions", "5"], p);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sinai_lyapunov_exponent_is_positive() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(p, "sinai.json", SINAI);
    let o = cylbill(&["lyapunov", "sinai.json", "--random", "--seed", "2", "--total-time", "500"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    let run = &r["runs"][0];
    assert!(run["estimate"].as_f64().unwrap() > 0.5);
    assert_eq!(run["unreliable"], false);
    assert!(run["windows"].as_array().unwrap().is_empty());
}

#[test]
fn product_orbits_always_split() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    product(p);
    let o = cylbill(&["splitting-scan", "product.json", "--orbits", "20", "--collisions", "30", "--seed", "1"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    assert!(r["fractions"].as_array().unwrap().iter().all(|f| f.as_f64() == Some(1.0)));
}

#[test]
fn hard_ball_scan_reports_fractions() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert!(cylbill(&["build", "hardball", "--n", "3", "--nu", "2", "--r", "0.2", "-o", "hb.json"], p).status.success());
    let o = cylbill(
        &["splitting-scan", "hb.json", "--orbits", "20", "--collisions", "50", "--checkpoints", "5,20", "--seed", "1"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    let fr: Vec<f64> = serde_json::from_value(r["fractions"].clone()).unwrap();
    assert_eq!(fr.len(), 3);
    assert!(fr.iter().all(|f| (0.0..=1.0).contains(f)));
    assert!(fr.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn trace_reports_ranks() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(p, "sinai.json", SINAI);
    sigma(p, "s.json", &[0]);
    write(p, "spec.json", r#"{"format": "cylbill-spec", "version": 1, "v0": [1.0, 0.0], "start": [-1.0, 0.0], "offsets": [[0.0, 0.1]]}"#);
    let o = cylbill(&["trace", "sinai.json", "s.json", "spec.json", "--ranks"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    let t = r["times"][0].as_f64().unwrap();
    assert!((t - (1.0 - (0.09f64 - 0.01).sqrt())).abs() < 1e-12);
    assert_eq!(r["ranks"]["w_plus_dim"], 1);
    assert_eq!(r["ranks"]["neutral_dim"], 1);

    write(p, "miss.json", r#"{"format": "cylbill-spec", "version": 1, "v0": [1.0, 0.0], "start": [-1.0, 0.0], "offsets": [[0.0, 0.5]]}"#);
    let o = cylbill(&["trace", "sinai.json", "s.json", "miss.json"], p);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn help_and_usage() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cylbill(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(cylbill(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(cylbill(&["frobnicate"], dir.path()).status.code(), Some(4));
    assert_eq!(cylbill(&["classify"], dir.path()).status.code(), Some(4));
}
