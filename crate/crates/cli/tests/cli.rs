use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn specdiv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specdiv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "%%MatrixMarket matrix array real general\n3 3\n0.5\n0.1\n0\n0\n-0.3\n0.2\n0.1\n0\n0.1\n";

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn n_formula_from_command_line() {
    let dir = TempDir::new().unwrap();
    let out = specdiv(dir.path(), &["calc", "n-formula", "--alpha0", "0.9", "--eps0", "0.01", "--beta", "1e-3"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["report"]["value"], 21.0);
    let file = std::fs::read(dir.path().join("calc.json")).unwrap();
    assert_eq!(file, out.stdout);
}

#[test]
fn missing_input_exits_with_io_code() {
    let dir = TempDir::new().unwrap();
    let out = specdiv(dir.path(), &["eig", "--input", "absent.mtx"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.mtx"));
}

#[test]
fn parse_error_exits_with_io_code_and_line() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.mtx", "%%MatrixMarket matrix array real general\n2 2\n1\n2\nx\n4\n");
    let out = specdiv(dir.path(), &["eig", "--input", "bad.mtx"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn invalid_parameter_exits_with_contract_code() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.mtx", SMALL);
    let out = specdiv(dir.path(), &["eig", "--input", "a.mtx", "--delta", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = specdiv(dir.path(), &["eig", "--input", "a.mtx", "--delta", "not-a-number"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eig_meets_backward_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.mtx", SMALL);
    let out = specdiv(
        dir.path(),
        &["eig", "--input", "a.mtx", "--delta", "0.05", "--seed", "7", "--vectors", "v.mtx"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert!(v["report"]["residual"].as_f64().unwrap() <= 0.05);
    assert_eq!(v["report"]["eigenvalues"].as_array().unwrap().len(), 3);
    let vectors = std::fs::read_to_string(dir.path().join("v.mtx")).unwrap();
    assert!(vectors.starts_with("%%MatrixMarket matrix array complex general\n3 3\n"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.mtx", SMALL);
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["eig", "--input", "a.mtx", "--seed", "11", "--output", out];
        args.extend_from_slice(extra);
        assert!(specdiv(dir.path(), &args).status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let first = run("one.json", &[]);
    assert_eq!(first, run("two.json", &[]));
    assert_eq!(first, run("three.json", &["--parallel"]));
}

#[test]
fn parallel_lab_is_thread_count_independent() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_specdiv"))
            .current_dir(dir.path())
            .env("SPECDIV_THREADS", threads)
            .args(["lab", "haar-sigma", "--trials", "300", "--seed", "5", "--output", out])
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.json"), run("4", "b.json"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_specdiv"))
        .current_dir(dir.path())
        .env("SPECDIV_THREADS", "zero")
        .args(["calc", "list"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn written_matrix_is_readable_and_reproducible() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.mtx", SMALL);
    let out = specdiv(
        dir.path(),
        &["shatter", "--input", "a.mtx", "--gamma", "0.01", "--matrix-output", "x.mtx", "--seed", "3"],
    );
    assert!(out.status.success());
    let first = std::fs::read_to_string(dir.path().join("x.mtx")).unwrap();
    let out = specdiv(
        dir.path(),
        &["sgn", "--input", "x.mtx", "--eps", "0.01", "--alpha0", "0.99", "--sign-output", "s.mtx"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = specdiv(
        dir.path(),
        &["shatter", "--input", "a.mtx", "--gamma", "0.01", "--matrix-output", "y.mtx", "--seed", "3"],
    );
    assert!(out.status.success());
    assert_eq!(first, std::fs::read_to_string(dir.path().join("y.mtx")).unwrap());
}

#[test]
fn split_reports_balanced_counts() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "d.mtx",
        "%%MatrixMarket matrix coordinate complex general\n4 4 4\n1 1 0.6 0\n2 2 -0.5 0.1\n3 3 0.2 -0.4\n4 4 -0.1 0.5\n",
    );
    let out = specdiv(dir.path(), &["split", "--input", "d.mtx", "--gamma", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    let plus = v["report"]["split"]["n_plus"].as_u64().unwrap();
    let minus = v["report"]["split"]["n_minus"].as_u64().unwrap();
    assert_eq!(plus + minus, 4);
    assert!(plus >= 1 && minus >= 1);
}

#[test]
fn certify_flags_a_line_through_an_eigenvalue() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "d.mtx", "%%MatrixMarket matrix array real general\n2 2\n0\n0\n0\n0.5\n");
    let out = specdiv(dir.path(), &["certify", "--input", "d.mtx", "--eps", "1e-3", "--omega", "0.5"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["report"]["certified"], false);
    assert_eq!(v["status"], "not_certified");
}

#[test]
fn lab_csv_has_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let out = specdiv(dir.path(), &["lab", "haar-sigma", "--trials", "50", "--format", "csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("lab.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert_eq!(text.lines().next(), Some("sigma_min"));
}

#[test]
fn symmetric_input_is_rejected() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "s.mtx", "%%MatrixMarket matrix array real symmetric\n1 1\n1\n");
    let out = specdiv(dir.path(), &["eig", "--input", "s.mtx"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetric"));
}
