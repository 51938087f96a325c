use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mixlfsm"));
    c.env_remove("MIXLFSM_THREADS").env_remove("MIXLFSM_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FBM: &str = r#"
schema_version = 1
seed = 7
[model]
components = [{ b = 1.0, hurst = 0.3, beta = 2.0 }]
[scheme]
n = 1024
"#;

#[test]
fn simulate_writes_path_config_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FBM);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--format", "csv,bin"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["path.csv", "path.bin", "resolved_config.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.join("path.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1024 + 1);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["files"].as_array().unwrap().len(), 3);
    assert!(dir.path().read_dir().unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".partial")));
}

#[test]
fn simulation_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FBM);
    let mut bins = Vec::new();
    for (i, t) in ["1", "4", "1"].iter().enumerate() {
        let out = dir.path().join(format!("o{i}"));
        let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--format", "bin", "--threads", t]);
        assert!(o.status.success());
        bins.push(std::fs::read(out.join("path.bin")).unwrap());
    }
    assert_eq!(bins[0], bins[1]);
    assert_eq!(bins[0], bins[2]);
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FBM);
    let a = dir.path().join("a");
    assert!(run(&["simulate", "--config", s(&cfg), "--out", s(&a), "--format", "bin"]).status.success());
    let resolved = a.join("resolved_config.json");
    let b = dir.path().join("b");
    let o = run(&["simulate", "--config", s(&resolved), "--out", s(&b), "--format", "bin"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(a.join("path.bin")).unwrap(), std::fs::read(b.join("path.bin")).unwrap());
    let (mut ra, mut rb) = (json(&resolved), json(&b.join("resolved_config.json")));
    ra["output"]["dir"] = Value::Null;
    rb["output"]["dir"] = Value::Null;
    assert_eq!(ra, rb);
}

#[test]
fn short_series_is_an_input_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &FBM.replace("n = 1024", "n = 5"));
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("too small"));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_and_versions_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "a.toml", &format!("{FBM}\n[extra]\nx = 1\n"));
    assert_eq!(run(&["simulate", "--config", s(&bad)]).status.code(), Some(2));
    let v2 = write_config(dir.path(), "b.toml", &FBM.replace("schema_version = 1", "schema_version = 2"));
    let o = run(&["simulate", "--config", s(&v2)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn estimate_from_simulation_and_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
schema_version = 1
seed = 3
[model]
components = [{ b = 1.0, hurst = 0.7, beta = 1.5 }]
[scheme]
n = 4000
"#,
    );
    let out = dir.path().join("est");
    let o = run(&["estimate", "--config", s(&cfg), "--simulate", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = json(&out.join("estimate.json"));
    assert_eq!(e["converged"], true);
    assert!((e["theta_hat"]["coords"][1].as_f64().unwrap() - 0.7).abs() < 0.1);
    assert!(e["rate_standardized_errors"].is_array());
    assert!(out.join("identifiability.json").exists());
    assert!(out.join("estimate.csv").exists());

    let sim = dir.path().join("sim");
    assert!(run(&["simulate", "--config", s(&cfg), "--out", s(&sim)]).status.success());
    let from_file = dir.path().join("est2");
    let o = run(&[
        "estimate",
        "--config",
        s(&cfg),
        "--input",
        s(&sim.join("path.csv")),
        "--out",
        s(&from_file),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e2 = json(&from_file.join("estimate.json"));
    assert_eq!(e2["theta_hat"], e["theta_hat"]);
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FBM);
    let out = dir.path().join("out");
    let o = run(&["estimate", "--config", s(&cfg), "--input", "/nonexistent/path.csv", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
    assert_eq!(run(&["estimate", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", "/nonexistent.toml"]).status.code(), Some(3));
}

#[test]
fn singular_threshold_design_fails_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
schema_version = 1
[model]
components = [
  { b = 1.0, hurst = 0.3, beta = 2.0 },
  { b = 1.0, hurst = 0.5, beta = 2.0 },
  { b = 1.0, hurst = 0.5, beta = 1.2 },
  { b = 1.0, hurst = 0.75, beta = 0.8 },
]
[scheme]
n = 2048
[design]
method = "threshold"
case = "iii"
"#,
    );
    let out = dir.path().join("out");
    let o = run(&["estimate", "--config", s(&cfg), "--simulate", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["exit_code"], 5);
    assert!(m["error"].as_str().unwrap().contains("H̄1 β1 ≠ H̄2 β2"), "{}", m["error"]);
    assert!(!out.join("estimate.json").exists());
}

#[test]
fn clt_experiment_reports_ks_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{FBM}\n[mc]\nn_grid = [512]\nreps = 60\ncase = \"i\"\n"),
    );
    let out = dir.path().join("out");
    let o = run(&["mc", "clt", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["experiment"], "clt");
    let cells = r["cells"].as_array().unwrap();
    assert!(!cells.is_empty());
    for c in cells {
        let p = c["values"]["ks_p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("ks_p"));

    let md = run(&["report", s(&out.join("report.json"))]);
    assert!(md.status.success());
    assert!(String::from_utf8_lossy(&md.stdout).contains("## clt"));
}

#[test]
fn rates_refuse_unidentifiable_truths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
schema_version = 1
[model]
components = [{ b = 1.0, hurst = 0.2, beta = 2.0 }, { b = 1.0, hurst = 0.7, beta = 2.0 }]
[mc]
n_grid = [256, 512]
reps = 4
"#,
    );
    let out = dir.path().join("out");
    let o = run(&["mc", "rates", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("H_j < H_1"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn variance_on_brownian_plus_stable_reports_suppression() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
schema_version = 1
[model]
components = [{ b = 1.0, hurst = 0.5, beta = 2.0 }, { b = 1.0, hurst = 0.8333333333333334, beta = 1.2 }]
[design]
method = "threshold"
[mc]
n_grid = [256, 512]
reps = 20
function = "f2"
"#,
    );
    let out = dir.path().join("out");
    let o = run(&["mc", "variance", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    let cells = r["cells"].as_array().unwrap();
    assert!(cells.iter().all(|c| c["values"].get("ratio_f_over_f1").is_some()));
}

#[test]
fn report_needs_files_and_reads_several() {
    assert_eq!(run(&["report"]).status.code(), Some(2));
    let o = run(&["report", "/nonexistent/report.json"]);
    assert_eq!(o.status.code(), Some(3));
}
