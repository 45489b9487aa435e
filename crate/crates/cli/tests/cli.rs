use std::path::Path;
use std::process::{Command, Output};

fn fkup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkup"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("single-line JSON")
}

#[test]
fn gap_order_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"parameter_grid":[[0.2],[0.1],[0.05],[0.025]]}"#);
    let out_dir = dir.path().join("out");
    let out = fkup(&["gap-order", "--config", &cfg, "--check", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("param1,param2,energy,target,rel_err,wall_count,converged\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "gap-order");
    assert_eq!(summary["passed"], true);
    let order = summary["fitted_order"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&order));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = fkup(&["gap-order", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 1);
    assert!(err["message"].as_str().unwrap().contains("cannot read"));
}

#[test]
fn malformed_and_mismatched_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"parameter_grid":[[0.1],[0.2]]}"#);
    assert_eq!(fkup(&["sweep-delta", "--config", &cfg]).status.code(), Some(1));
    let cfg = write_config(dir.path(), r#"{"experiment":"profile"}"#);
    assert_eq!(fkup(&["recovery", "--config", &cfg]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "not json");
    assert_eq!(fkup(&["profile", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn degenerate_potential_is_an_experiment_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"potential":{"well_depth":0.125,"r_min":1.2,"standoff":12.0,"sigma":0.5,"truncation_radius":16,"quadrature_tol":1e-9}}"#,
    );
    let out = fkup(&["validate-potential", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("degenerate well"));
}

#[test]
fn failed_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // A single coarse mesoscale run is far from the limit energy.
    let cfg = write_config(dir.path(), r#"{"parameter_grid":[[0.2]],"window_halfwidth":8}"#);
    let out_dir = dir.path().join("o");
    let out = fkup(&["minimize", "--config", &cfg, "--check", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "check");
    assert!(out_dir.join("minimizer_0.csv").exists());
    assert!(out_dir.join("trace_0.csv").exists());
    // Without --check the same run succeeds.
    let out = fkup(&["minimize", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn recovery_writes_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"parameter_grid":[[0.1,0.1],[0.01,0.05]],"target":{"breakpoints":[0.0],"levels":[0,1]}}"#,
    );
    let out_dir = dir.path().join("r");
    let out = fkup(&["recovery", "--config", &cfg, "--check", "--jobs", "2", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("recovery_1.json")).unwrap()).unwrap();
    assert!(sidecar["beta"].as_f64().unwrap() > sidecar["tangent_point"].as_f64().unwrap());
    let samples = std::fs::read_to_string(out_dir.join("recovery_1.csv")).unwrap();
    assert!(samples.starts_with("x,value\n"));
}

#[test]
fn results_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"parameter_grid":[[0.2],[0.1]],"window_halfwidth":10}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(fkup(&["sweep-delta", "--config", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(
        fkup(&["sweep-delta", "--config", &cfg, "--jobs", "1", "--out", b.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert_eq!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
}
