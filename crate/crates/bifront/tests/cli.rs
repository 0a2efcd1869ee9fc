//! Black-box tests of the command-line binary: exit codes, report schema
//! stability, reproducibility, and problem-file diagnostics.

use std::path::PathBuf;
use std::process::{Command, Output};

fn problem_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems/worked_example.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bifront"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on_worked_example(args: &[&str]) -> Output {
    let p = problem_path();
    let mut full = vec!["--problem", p.to_str().unwrap()];
    full.extend_from_slice(args);
    run(&full)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn front_reports_the_single_point_and_exits_zero() {
    let out = run_on_worked_example(&["front", "--x", "4,3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("2.0, 2.0"), "{text}");
}

#[test]
fn stationarity_exit_codes_distinguish_the_two_candidates() {
    let pos = run_on_worked_example(&["stationarity", "--x", "4,3", "--y", "1,2"]);
    assert_eq!(pos.status.code(), Some(0));
    assert!(stdout(&pos).contains("Stationary"));

    let neg = run_on_worked_example(&["stationarity", "--x", "5,4", "--y", "1,2"]);
    assert_eq!(neg.status.code(), Some(1));
    assert!(stdout(&neg).contains("NotStationary"));
}

#[test]
fn coderivative_form_agrees_on_the_candidates() {
    let pos = run_on_worked_example(&[
        "stationarity",
        "--x",
        "4,3",
        "--y",
        "1,2",
        "--coderivative-form",
    ]);
    assert_eq!(pos.status.code(), Some(0));
    let neg = run_on_worked_example(&[
        "stationarity",
        "--x",
        "5,4",
        "--y",
        "1,2",
        "--coderivative-form",
    ]);
    assert_eq!(neg.status.code(), Some(1));
}

#[test]
fn reports_are_reproducible_byte_for_byte() {
    for args in [
        vec!["--json", "front", "--x", "4,3"],
        vec!["--json", "stationarity", "--x", "4,3", "--y", "1,2"],
        vec!["--json", "validate"],
    ] {
        let a = run_on_worked_example(&args);
        let b = run_on_worked_example(&args);
        assert_eq!(a.stdout, b.stdout, "args {args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn json_reports_share_one_schema_across_commands() {
    let keys = |args: &[&str]| -> Vec<String> {
        let out = run_on_worked_example(args);
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    let a = keys(&["--json", "front", "--x", "4,3"]);
    let b = keys(&["--json", "validate"]);
    let c = keys(&["--json", "stationarity", "--x", "5,4", "--y", "1,2"]);
    assert_eq!(a, b);
    assert_eq!(a, c);

    let out = run_on_worked_example(&["--json", "validate"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["front"].is_null(), "inapplicable fields stay null");
    assert!(v["certificate"].is_null());
}

#[test]
fn missing_file_and_bad_tolerance_are_input_errors() {
    let missing = run(&["--problem", "/no/such/file.json", "validate"]);
    assert_eq!(missing.status.code(), Some(2));

    let badtol = run_on_worked_example(&["--tol", "bogus=1", "front", "--x", "4,3"]);
    assert_eq!(badtol.status.code(), Some(2));
    assert!(stdout(&badtol).contains("bogus"));
}

fn write_mutated(mutate: impl Fn(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(problem_path()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    mutate(&mut v);
    let mut path = std::env::temp_dir();
    path.push(format!(
        "bifront-cli-test-{}-{}.json",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn malformed_matrix_is_reported_with_its_key_path() {
    let path = write_mutated(|v| {
        v["lower"]["B"].as_array_mut().unwrap().pop();
    });
    let out = run(&["--problem", path.to_str().unwrap(), "validate"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("lower.B"), "{}", stdout(&out));
}

#[test]
fn missing_objective_block_is_an_input_error() {
    let path = write_mutated(|v| {
        v["upper"].as_object_mut().unwrap().remove("F");
    });
    let out = run(&["--problem", path.to_str().unwrap(), "validate"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("upper.F"), "{}", stdout(&out));
}

#[test]
fn validate_summarizes_the_worked_example() {
    let out = run_on_worked_example(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("valid"), "{text}");
    assert!(text.contains("bounded"), "{text}");
    assert!(text.contains("exact front path available"), "{text}");
}

#[test]
fn solset_and_cq_commands_exit_zero_on_the_worked_example() {
    assert_eq!(
        run_on_worked_example(&["solset", "--x", "5,4"]).status.code(),
        Some(0)
    );
    assert_eq!(
        run_on_worked_example(&["domination", "--x", "5,4"]).status.code(),
        Some(0)
    );
    assert_eq!(
        run_on_worked_example(&["mfcq", "--x", "4,3", "--y", "1,2"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run_on_worked_example(&["gvfcq", "--x", "4,3", "--y", "1,2"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run_on_worked_example(&["oracle-front", "--x", "4,3", "--h", "0.5"])
            .status
            .code(),
        Some(0)
    );
}
