use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../patchy/scenarios").join(format!("{name}.cfg"))
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn patchy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchy")).args(args).output().expect("binary runs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = patchy(args);
    (
        o.status.code().expect("exit code"),
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_matches_golden_output() {
    for (name, code) in [("demo_generic", 0), ("demo_tangent", 2), ("tangent_edge", 2), ("interior_zero", 2)] {
        let (c, out, _) = run(&["validate", path(&scenario(name))]);
        assert_eq!(c, code, "{name}");
        assert_eq!(out, golden(&format!("validate_{name}.txt")), "{name}");
    }
}

#[test]
fn tangent_demo_cites_the_transversal_check() {
    let (c, out, err) = run(&["validate", path(&scenario("demo_tangent"))]);
    assert_eq!(c, 2);
    assert!(out.contains("check=transversal ok=false"));
    assert!(err.contains("transversal"));
}

#[test]
fn shadow_matches_golden_output() {
    let (c, out, err) = run(&["shadow", path(&scenario("demo_generic"))]);
    assert_eq!(c, 0, "{err}");
    assert_eq!(out, golden("shadow_demo_generic_diagnostics.csv"));
    assert_eq!(err, golden("shadow_demo_generic.txt"));
}

#[test]
fn rate_sweep_is_linear_and_matches_golden_output() {
    let (c, out, err) = run(&["rate", path(&scenario("demo_generic")), "--tv", "1e-2:1e-4:5", "--method", "shadow"]);
    assert_eq!(c, 0, "{err}");
    assert_eq!(out.lines().count(), 6);
    assert_eq!(out, golden("rate_demo_generic_shadow.csv"));
    assert_eq!(err, golden("rate_demo_generic_shadow.txt"));
    let exponent: f64 = err
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("exponent="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((exponent - 1.0).abs() <= 0.1, "{exponent}");
}

#[test]
fn example14_matches_golden_output() {
    let (c, out, err) = run(&["example14"]);
    assert_eq!(c, 0);
    assert_eq!(out, golden("example14.csv"));
    assert_eq!(err, golden("example14.txt"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let file = scenario("demo_random");
    let args = ["simulate", path(&file), "--seed", "11"];
    let a = patchy(&args);
    let b = patchy(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = patchy(&["simulate", path(&file), "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn out_directory_receives_the_shadow_result() {
    let dir = tempfile::tempdir().unwrap();
    let (c, out, err) = run(&["shadow", path(&scenario("demo_random")), "--out", path(dir.path())]);
    assert_eq!(c, 0, "{err}");
    assert!(out.starts_with("sup_distance="));
    for f in ["demo_random_x.csv", "demo_random_y.csv", "demo_random_diagnostics.csv", "demo_random_shadow.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let x = std::fs::read_to_string(dir.path().join("demo_random_x.csv")).unwrap();
    assert_eq!(x.lines().next(), Some("t,x,y,alpha,is_jump"));
    assert!(!x.lines().skip(1).any(|l| l.ends_with(",1")), "shadowing solution has no jumps");
}

#[test]
fn schema_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    for text in ["{", r#"{"schema": 2}"#, r#"{"schema": 1, "name": "x"}"#] {
        std::fs::write(&bad, text).unwrap();
        let (c, _, err) = run(&["validate", path(&bad)]);
        assert_eq!(c, 1, "{text}: {err}");
    }
    let (c, _, _) = run(&["validate", "/nonexistent/scenario.cfg"]);
    assert_eq!(c, 1);
    let (c, _, _) = run(&["rate", path(&scenario("demo_generic")), "--tv", "1e-2:1e-4"]);
    assert_eq!(c, 1);
    let (c, _, _) = run(&["rate", path(&scenario("demo_generic")), "--method", "guess"]);
    assert_eq!(c, 1);
}

#[test]
fn invalid_fields_are_refused_by_runtime_commands() {
    let (c, _, err) = run(&["shadow", path(&scenario("interior_zero"))]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn runtime_failures_exit_with_three_and_name_the_stage() {
    let (c, _, err) = run(&["rate", path(&scenario("demo_generic")), "--tv", "1e-2:1e-3:5"]);
    assert_eq!(c, 3);
    assert!(err.contains("rate sweep"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.cfg");
    let text = std::fs::read_to_string(scenario("demo_generic")).unwrap().replace("[0.006, 0.008]", "[0.6, 0.8]");
    std::fs::write(&big, text).unwrap();
    let (c, _, err) = run(&["shadow", path(&big)]);
    assert_eq!(c, 3, "{err}");
    assert!(err.contains("shadow: "), "{err}");
}

#[test]
fn figures_emit_plot_series() {
    for which in ["1", "2", "3"] {
        let (c, out, err) = run(&["figure", which]);
        assert_eq!(c, 0, "{err}");
        assert_eq!(out.lines().next(), Some("series,x,y"));
        assert!(out.lines().count() > 100);
    }
    let (c, _, _) = run(&["figure", "4"]);
    assert_eq!(c, 1);
}
