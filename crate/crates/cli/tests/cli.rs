use std::path::PathBuf;
use std::process::{Command, Output};

fn graph(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../graphs").join(name)
}

fn dpw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpw")).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dpw-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn three_rays_are_balanced_and_pre_embedded() {
    let out = dpw(&["graph", "check", graph("three_rays.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out.stdout);
    assert_eq!(r["balanced"], true);
    assert_eq!(r["pre_embedded"], true);
    assert_eq!(r["nondegeneracy"]["rank"], 2);
}

#[test]
fn unbalanced_graph_is_reported_and_refused() {
    let g = graph("unbalanced.json");
    let out = dpw(&["graph", "check", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["balanced"], false);
    let state = tmp("unbalanced_state.json");
    let out = dpw(&["solve", g.to_str().unwrap(), "--t", "0.05", "--out", state.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not balanced"));
    assert!(!state.exists());
}

#[test]
fn two_ray_solve_converges_and_is_reproducible() {
    let (a, b) = (tmp("two_a.json"), tmp("two_b.json"));
    let g = graph("two_rays.json");
    let out = dpw(&["solve", g.to_str().unwrap(), "--t", "0.05", "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let state = json(&std::fs::read(&a).unwrap());
    assert!(state["residual"].as_f64().unwrap() < 1e-9);
    let out = Command::new(env!("CARGO_BIN_EXE_dpw"))
        .env("DPW_THREADS", "1")
        .args(["solve", g.to_str().unwrap(), "--t", "0.05", "--out", b.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let obj = tmp("two.obj");
    let report = tmp("two_report.json");
    let out = dpw(&["mesh", a.to_str().unwrap(), "--res", "16", "--modes", "16", "--out", obj.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&obj).unwrap();
    assert!(text.lines().any(|l| l.starts_with("g sphere_1")));
    assert!(text.lines().any(|l| l.starts_with("f ")));
    let r = json(&std::fs::read(&report).unwrap());
    assert_eq!(r["ends"].as_array().unwrap().len(), 2);
}

#[test]
fn run_config_guards_are_preconditions() {
    let g = graph("chain.json");
    let out_path = tmp("guard.json");
    let o = out_path.to_str().unwrap();
    for extra in [vec!["--t", "0.3"], vec!["--t", "0.01", "--modes", "3"], vec!["--t", "0.01", "--rho", "1.0"], vec!["--t", "-0.1"]] {
        let mut args = vec!["solve", g.to_str().unwrap(), "--out", o];
        args.extend(extra.iter().copied());
        assert_eq!(dpw(&args).status.code(), Some(3), "{extra:?}");
    }
}

#[test]
fn io_and_parse_errors_have_their_own_codes() {
    let out = dpw(&["graph", "check", "/nonexistent/graph.json"]);
    assert_eq!(out.status.code(), Some(1));
    let bad = tmp("bad.json");
    std::fs::write(&bad, "{\"vertices\": [").unwrap();
    assert_eq!(dpw(&["graph", "check", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, r#"{"vertices":[{"id":1,"x":0,"y":0}],"edges":[{"a":1,"b":1,"weight":1}]}"#).unwrap();
    assert_eq!(dpw(&["graph", "check", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(dpw(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_dpw")).env("DPW_THREADS", "zero").args(["verify", "--suite", "wiener", "--cases", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_emits_a_deterministic_report() {
    let run = || dpw(&["verify", "--suite", "wiener", "--seed", "11", "--cases", "50"]);
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a.stdout);
    assert_eq!(r["passed"], true);
    assert_eq!(r["suites"][0]["suite"], "wiener");
    assert!(r["suites"][0]["checks"].as_array().unwrap().iter().all(|c| c["cases"] == 50 && c["failures"] == 0));
}

#[test]
fn neck_report_has_the_expected_exponent() {
    let out_path = tmp("neck.json");
    let out = dpw(&["neck", "--out", out_path.to_str().unwrap(), "--points", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&std::fs::read(&out_path).unwrap());
    assert!(r["exponent"].as_f64().unwrap() >= 0.5);
    assert_eq!(r["samples"].as_array().unwrap().len(), 5);
    assert_eq!(dpw(&["neck", "--out", out_path.to_str().unwrap(), "--t-max", "1.0"]).status.code(), Some(3));
}
