use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kleinman::io::read_result;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kleinman"))
}

fn corpus(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(file)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_result_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let o = bin()
        .arg("solve")
        .arg(corpus("scalar.json"))
        .arg("--out")
        .arg(&out)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (p, cfg) = read_result(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((p[(0, 0)] - (2f64.sqrt() - 1.0)).abs() <= 1e-10);
    assert_eq!(cfg.rel_tol, 1e-10);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("step,residual,stepGap,abscissa,errorToOracle\n"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let a = run(&["solve", corpus("diagonal_unstable.json").to_str().unwrap(), "--oracle"]);
    let b = run(&["solve", corpus("diagonal_unstable.json").to_str().unwrap(), "--oracle"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn nonstabilizable_is_a_solver_error() {
    let o = run(&["solve", corpus("nonstabilizable.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NotStabilizable"));
    assert!(o.stdout.is_empty());
}

#[test]
fn input_errors_exit_two() {
    let o = run(&["solve", corpus("malformed.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MissingField"));
    assert_eq!(run(&["solve", "/nonexistent/problem.json"]).status.code(), Some(2));
    // a riccati file handed to the lyapunov command
    assert_eq!(run(&["lyapunov", corpus("scalar.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["solve", corpus("scalar.json").to_str().unwrap(), "--tol", "0"]).status.code(), Some(2));
    assert_eq!(run(&["certify", "--suite", "12"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn lyapunov_and_sqrt_commands() {
    let o = run(&["lyapunov", corpus("lyapunov.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["sqrt", corpus("sqrt_identity.json").to_str().unwrap(), "--method", "kron"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (p, cfg) = read_result(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.method, kleinman::lyapunov::LyapunovMethod::Kron);
    for i in 0..3 {
        assert!((p[(i, i)] - (2f64.sqrt() - 1.0)).abs() <= 1e-10);
    }
}

#[test]
fn stability_check_reports_json() {
    let o = run(&["stability-check", corpus("heat_n8_unstable.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["isStable"], false);
    assert_eq!(v["datkoConverges"], false);
}

#[test]
fn heat_demo_problem_file_reproduces_the_solve() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("heat.json");
    let o = bin()
        .args(["demo", "heat", "--n", "16", "--nu", "1", "--problem-out"])
        .arg(&problem)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let again = bin().arg("solve").arg(&problem).output().unwrap();
    assert_eq!(again.status.code(), Some(0));
    let (p1, _) = read_result(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let (p2, _) = read_result(&String::from_utf8(again.stdout).unwrap()).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(run(&["demo", "heat", "--n", "2"]).status.code(), Some(2));
}

#[test]
fn bench_matches_documented_exit_codes() {
    let o = run(&["bench"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("16 of 16 problems"));
}

#[test]
fn certify_selected_suites() {
    let o = run(&["certify", "--suite", "1,9,10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["certify", "--suite", "1", "--mutate", "flip-quadratic-sign"]);
    assert_eq!(o.status.code(), Some(3));
}
