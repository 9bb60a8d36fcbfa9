use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehrenfest-lab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_findings() {
    let dir = tempfile::tempdir().unwrap();
    let clean = lab(&["validate", "--scenario", "double-well"]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(stdout(&clean).is_empty(), "{}", stdout(&clean));

    let cfg = write_config(dir.path(), r#"{"scenario": "double-well", "hbar": 0.001, "dt": 1.0}"#);
    let warned = lab(&["validate", "--config", &cfg]);
    assert_eq!(warned.status.code(), Some(0));
    assert!(stdout(&warned).starts_with("warning: dt:"), "{}", stdout(&warned));

    let cfg = write_config(dir.path(), r#"{"scenario": "double-well", "hbar": 0.001, "start": {"q": 1.99, "p": 0.0}}"#);
    let bad = lab(&["validate", "--config", &cfg]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("error: start:"), "{}", stdout(&bad));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let ok = lab(&["run", "--scenario", "free", "--hbar", "0.01", "--t-final", "0.1", "--out", out]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(Path::new(out).join("manifest.json").exists());

    let cfg = write_config(dir.path(), r#"{"scenario": "free", "hbar": 0.01, "unknown": 1}"#);
    assert_eq!(lab(&["run", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(lab(&["run", "--scenario", "free", "--hbar", "-1"]).status.code(), Some(2));
    assert_eq!(lab(&["sweep", "--scenario", "double-well", "--hbar", "0.001"]).status.code(), Some(2));
    assert_eq!(lab(&["run", "--scenario", "free", "--t-final", "ehrenfest"]).status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "free", "hbar": 0.01, "grid": {"x_min": -3.0, "x_max": 3.0, "n": 1024},
            "start": {"q": 0.0, "p": 2.0}, "t_final": 1.4}"#,
    );
    let escaped = lab(&["run", "--config", &cfg, "--out", out]);
    assert_eq!(escaped.status.code(), Some(3));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let nested = blocker.join("out");
    let io = lab(&["run", "--scenario", "free", "--hbar", "0.01", "--t-final", "0.1", "--out", nested.to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(4));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "harmonic", "hbar": 0.1, "t_final": 3.0, "seed": 1, "diagnostics": ["measurement-samples"],
            "sample_count": 10}"#,
    );
    let o = lab(&["run", "--config", &cfg, "--hbar", "0.01", "--t-final", "0.5", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["hbar"], serde_json::json!(0.01));
    assert_eq!(manifest["config"]["t_final"], serde_json::json!(0.5));
    assert_eq!(manifest["config"]["seed"], serde_json::json!(9));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["files"], serde_json::json!(["evolution.csv", "samples.csv"]));
}
