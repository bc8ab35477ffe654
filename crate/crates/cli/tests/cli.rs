use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn futaki(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_futaki"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn temp_file(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("futaki-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CP1_SPEC: &str = r#"{
  "name": "cp1_expr",
  "complex_dim": 1,
  "potential": "log(1 + x1^2 + x2^2)",
  "compactification": "fs",
  "fields": [
    {"name": "rot", "Z": ["-x1", "-x2"], "F": "0", "H": "(1 - x1^2 - x2^2)/(1 + x1^2 + x2^2)"}
  ]
}
"#;

#[test]
fn list_names_manifolds_and_suites() {
    let o = futaki(&["list", "--json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let suites: Vec<&str> = v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert_eq!(suites.len(), 7);
    assert!(suites.contains(&"prop41"));
    assert!(v["manifolds"]
        .as_array()
        .unwrap()
        .iter()
        .any(|m| m["name"] == "cp1xcp1"));
}

#[test]
fn compute_is_deterministic_and_vanishes_on_cp1() {
    let out = std::env::temp_dir().join(format!("futaki-report-{}.json", std::process::id()));
    let a = futaki(&[
        "compute",
        "--manifold",
        "cp1",
        "--field",
        "rot",
        "--json",
        "--out",
        out.to_str().unwrap(),
    ]);
    let b = futaki(&["compute", "--manifold", "cp1", "--field", "rot", "--json"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&out).unwrap(), a.stdout);
    let v = json(&a);
    let r = &v["reports"][0];
    assert!(r["F_omega"].as_f64().unwrap().abs() < 1e-10);
    assert!((r["vol"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-10);
    assert!(r["F_ck"]["1"]["value"]["re"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn compute_on_spec_file_matches_builtin() {
    let p = temp_file("cp1.json", CP1_SPEC);
    let o = futaki(&[
        "compute",
        "--spec",
        p.to_str().unwrap(),
        "--json",
        "--nodes",
        "24",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["manifold"], "cp1_expr");
    assert!((v["reports"][0]["vol"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-8);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["verify", "--suite", "nonsense", "--manifold", "cp1"],
        vec!["compute", "--manifold", "cp3"],
        vec!["compute", "--manifold", "cp1", "--field", "nope"],
        vec!["compute", "--manifold", "cp1", "--jet-order", "4"],
        vec!["compute", "--manifold", "cp1", "--tol", "-1"],
        vec!["compute"],
    ] {
        let o = futaki(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn malformed_spec_reports_position() {
    let bad = CP1_SPEC.replace("\"fs\"", "\"fs\",\n  \"bogus\": 1");
    let p = temp_file("bad.json", &bad);
    let o = futaki(&["compute", "--spec", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    let bad = CP1_SPEC.replace("\"-x1\", \"-x2\"", "\"-x1\", \"-x2 +\"");
    let p = temp_file("bad_field.json", &bad);
    let o = futaki(&["compute", "--spec", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("field"), "{}", stderr(&o));
}

#[test]
fn non_holomorphic_field_is_rejected() {
    let spec = CP1_SPEC.replace("\"-x1\", \"-x2\"", "\"x1*x1\", \"0\"");
    let p = temp_file("nonhol.json", &spec);
    let o = futaki(&["compute", "--spec", p.to_str().unwrap(), "--nodes", "8"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("residual"), "{}", stderr(&o));
}

#[test]
fn pointwise_suites_pass() {
    for (suite, m) in [
        ("bianchi", "cp2"),
        ("bianchi", "cp1xcp1"),
        ("chern_identity", "cp2"),
        ("trace_identity", "cp2"),
        ("trace_identity", "cp1"),
    ] {
        let o = futaki(&["verify", "--suite", suite, "--manifold", m, "--json"]);
        assert_eq!(
            code(&o),
            0,
            "{suite} on {m}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
        assert_eq!(json(&o)["passed"], true);
    }
}

#[test]
fn integral_suites_pass_on_cp1() {
    for suite in ["moment_property", "class_invariance"] {
        let o = futaki(&[
            "verify",
            "--suite",
            suite,
            "--manifold",
            "cp1",
            "--nodes",
            "32",
        ]);
        assert_eq!(
            code(&o),
            0,
            "{suite}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn integral_suites_pass_on_cp2() {
    for suite in ["character", "prop41"] {
        let o = futaki(&[
            "verify",
            "--suite",
            suite,
            "--manifold",
            "cp2",
            "--field",
            "e12,e21",
            "--nodes",
            "6",
        ]);
        assert_eq!(
            code(&o),
            0,
            "{suite}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn failing_check_exits_one() {
    let o = futaki(&[
        "verify",
        "--suite",
        "moment_property",
        "--manifold",
        "cp1",
        "--nodes",
        "16",
        "--tol",
        "1e-300",
        "--json",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn character_needs_a_non_commuting_pair() {
    let o = futaki(&["verify", "--suite", "character", "--manifold", "cp1xcp1"]);
    assert_eq!(code(&o), 2);
}
