use kleinman::config::SolverConfig;
use kleinman::io::{load_problem, read_result, write_problem, Mode, ProblemFile, ResultFile};
use kleinman::operator::Matrix;
use kleinman::pipeline::solve_problem;
use proptest::prelude::*;

#[test]
fn flat_and_nested_matrices_agree() {
    let nested = ProblemFile::from_json(r#"{"n":2,"m":1,"p":1,"A":[[1,2],[3,4]],"B":[[0],[1]],"C":[[1,0]]}"#).unwrap();
    let flat = ProblemFile::from_json(r#"{"n":2,"m":1,"p":1,"A":[1,2,3,4],"B":[0,1],"C":[1,0]}"#).unwrap();
    assert_eq!(nested, flat);
    assert_eq!(nested.a.unwrap()[(1, 0)], 3.0);
}

#[test]
fn loader_errors_name_the_field() {
    let e = ProblemFile::from_json(r#"{"n":2,"m":1,"p":1,"A":[[1,2]],"B":[[0],[1]],"C":[[1,0]]}"#).unwrap_err();
    assert!(e.to_string().starts_with("DimensionMismatch: field \"A\""), "{e}");
    let e = ProblemFile::from_json(r#"{"mode":"sqrt","n":1,"N":[[1]],"Q":[[1]]}"#).unwrap_err();
    assert_eq!(e.to_string(), "MissingField: \"a\"");
    let e = ProblemFile::from_json(r#"{"n":1,"m":1,"p":1,"A":[[1]],"B":[[1]],"C":[[1]],"extra":1}"#).unwrap_err();
    assert!(e.is_input_error());
    let e = ProblemFile::from_json(r#"{"mode":"sqrt","n":2,"a":1,"N":[[1,1],[0,1]],"Q":[[1,0],[0,1]]}"#).unwrap_err();
    assert!(e.is_input_error());
}

#[test]
fn written_problem_solves_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let problem = ProblemFile::from_json(
        r#"{"name":"x","n":2,"m":1,"p":1,"A":[[0.1,1],[0.3,-0.7]],"B":[[0],[1]],"C":[[1,0.5]]}"#,
    )
    .unwrap();
    write_problem(&path, &problem).unwrap();
    let loaded = load_problem(&path).unwrap();
    assert_eq!(loaded, problem);
    let cfg = SolverConfig::default();
    assert_eq!(solve_problem(&loaded, &cfg).unwrap(), solve_problem(&problem, &cfg).unwrap());
}

fn result_with(p: Matrix) -> ResultFile {
    ResultFile {
        name: None,
        mode: Mode::Riccati,
        p,
        k: None,
        residual: 0.0,
        relative_residual: 0.0,
        iterations: 0,
        kappa: None,
        closed_loop_abscissa: -1.0,
        trace: Vec::new(),
        config: SolverConfig::default(),
    }
}

proptest! {
    #[test]
    fn result_files_preserve_every_bit(entries in prop::collection::vec(-1e6f64..1e6, 9), scale in -290i32..290) {
        let p = Matrix::from_fn(3, 3, |i, j| entries[3 * i.min(j) + i.max(j)] * 10f64.powi(scale));
        let (back, _) = read_result(&result_with(p.clone()).to_json()).unwrap();
        for (x, y) in p.iter().zip(back.iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
