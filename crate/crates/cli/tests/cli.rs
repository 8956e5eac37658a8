use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lie-taylor"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema(name: &str) -> jsonschema::Validator {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/v1").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).expect("schema compiles")
}

/// Runs a subcommand, checks the exit status and validates every output
/// line against the subcommand's schema.
fn lines(sub: &str, args: &[&str], code: i32) -> Vec<Value> {
    let mut all = vec![sub];
    all.extend_from_slice(args);
    let out = run(&all);
    assert_eq!(out.status.code(), Some(code), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    let v = schema(sub);
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!parsed.is_empty(), "{sub} printed nothing");
    for l in &parsed {
        if let Err(e) = v.validate(l) {
            panic!("{sub}: {e}\n{l}");
        }
    }
    parsed
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[test]
fn seminorm_of_z_on_the_circle() {
    let l = lines("seminorm", &["--group", "U1", "--field", "identity", "--radius", "1", "--order", "40"], 0);
    let want = (2.0 * std::f64::consts::PI).exp();
    assert!(close(&l[0]["value"], want, 1e-6 * want), "{}", l[0]);
}

#[test]
fn extend_prints_value_and_estimate() {
    let l = lines("extend", &["--field", "entry-11", "--target", r#"{"exp": [[0, 0.4], [0.3, 0], [0, 0]]}"#], 0);
    // g11 of exp(0.4i H) exp(0.3 E) is e^{0.4i}.
    let v = &l[0]["value"];
    assert!(close(&v[0], 0.4f64.cos(), 1e-6) && close(&v[1], 0.4f64.sin(), 1e-6), "{v}");
    assert!(l[0]["error_estimate"].as_f64().unwrap() >= 0.0);
    let matrix = r#"[[[1, 0], [0, 0.5]], [[0, 0], [1, 0]]]"#;
    let l = lines("extend", &["--field", "entry-11", "--target", matrix], 0);
    assert!(close(&l[0]["value"][0], 1.0, 1e-6) && close(&l[0]["value"][1], 0.0, 1e-6));
}

#[test]
fn every_subcommand_matches_its_schema() {
    let l = lines("derive", &["--group", "SL2R", "--field", "adjoint", "--order", "3"], 0);
    assert_eq!(l[0]["coeffs"][3].as_array().unwrap().len(), 27);
    lines("derive", &["--group", "SL2C", "--field", "trace", "--order", "2", "--method", "quadrature"], 0);
    let l = lines("taylor", &["--target", r#"{"exp": [0.1, 0.2, 0.3]}"#], 0);
    assert!(l[0]["deviation"].as_f64().unwrap() < 1e-12);
    lines("majorant", &["--group", "U1", "--order", "20", "--radius", "0.5,1"], 0);
    lines("entire-check", &["--group", "U1"], 0);
    lines("riemann", &["--group", "SL2C", "--target", r#"{"exp": [[0.1, 0], [0, 0.2], [0, 0]]}"#], 0);
    lines("cauchy-check", &["--field", "trace-exp", "--order", "5", "--seed", "3"], 0);
    lines("steiner", &["--path", r#"[[[0.3, 0], [0, 0.2], [0, 0]], [[0, 0], [0.2, 0], [0, 0.1]]]"#, "--radius", "0.1"], 0);
    let l = lines("continue", &["--target", r#"{"exp": [[0, 0.4], [0, 0], [0, 0]]}"#], 0);
    assert!(!l[0]["steps"].as_array().unwrap().is_empty());
    lines("verify-extension", &["--field", "entry-11", "--seed", "5"], 0);
    let l = lines("laurent", &[], 0);
    assert!(close(&l[0]["data"]["coeffs"][3][0], 2.0, 1e-12));
}

#[test]
fn csv_output() {
    let out = run(&["laurent", "--format", "csv", "--order", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,re,im");
    assert_eq!(rows.len(), 6);
    assert!(rows[3].starts_with("0,3"));
    let out = run(&["continue", "--format", "csv", "--target", r#"{"exp": [[0, 0.4], [0, 0], [0, 0]]}"#]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("step,xi_norm,re,im,error_estimate\n"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"group": "U1", "field": "identity", "radius": [2.0], "order": 40}"#).unwrap();
    let out_path = dir.path().join("out.jsonl");
    let c = cfg.to_str().unwrap();
    let o = run(&["seminorm", "--config", c, "--radius", "1", "--out", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["r"], 1.0);
    let desc = dir.path().join("field.json");
    std::fs::write(&desc, r#"{"kind": "builtin", "name": "trace", "group": "SL2R"}"#).unwrap();
    let l = lines("derive", &["--field", desc.to_str().unwrap(), "--order", "0"], 0);
    assert!(close(&l[0]["coeffs"][0][0][0], 2.0, 0.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"group\": \"U1\",\n  \"ordr\": 3\n}").unwrap();
    let o = run(&["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert_eq!(run(&["derive", "--method", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["derive", "--group", "SL9"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["taylor"]).status.code(), Some(2));
    // Refusals.
    assert_eq!(run(&["derive", "--order", "20"]).status.code(), Some(3));
    assert_eq!(run(&["derive", "--group", "SL2C", "--method", "quadrature", "--order", "9"]).status.code(), Some(3));
    assert_eq!(run(&["cauchy-check", "--group", "Ctimes", "--field", "trig-poly"]).status.code(), Some(3));
    // A chain radius below the sample spacing asks for resampling.
    let o = run(&["steiner", "--path", "[[[2, 0], [0, 0], [0, 0]]]", "--radius", "0.001"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn identical_bytes_across_runs() {
    let a = run(&["cauchy-check", "--seed", "11", "--order", "10"]);
    let b = run(&["cauchy-check", "--seed", "11", "--order", "10"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["cauchy-check", "--seed", "12", "--order", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

/// The full battery through the binary, twice, at different thread counts.
#[test]
fn suite_passes_and_is_deterministic() {
    let go = |threads: &str| {
        bin().arg("suite").env("RAYON_NUM_THREADS", threads).output().expect("binary runs")
    };
    let a = go("1");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let v = schema("suite");
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 13);
    for l in text.lines() {
        let j: Value = serde_json::from_str(l).unwrap();
        assert!(v.validate(&j).is_ok(), "{l}");
        assert_eq!(j["pass"], true, "{l}");
    }
    let b = go("3");
    assert_eq!(a.stdout, b.stdout);
}
