use std::collections::BTreeSet;
use std::path::Path;

use ehrenfest_core::PhaseSpacePoint;
use ehrenfest_lab::config::{Diagnostic, HbarSpec, Scenario, TimeSpec};
use ehrenfest_lab::manifest::Status;
use ehrenfest_lab::{run, sweep, CliError, ExperimentConfig, RunManifest};

fn config(scenario: Scenario, dir: &Path, diagnostics: &[Diagnostic]) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: dir.to_path_buf(),
        diagnostics: diagnostics.iter().copied().collect::<BTreeSet<_>>(),
        ..ExperimentConfig::preset(scenario)
    }
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn exponent(dir: &Path, stem: &str) -> f64 {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["exponent"].as_f64().unwrap()
}

#[test]
fn dilation_spreads_to_unit_scale_at_half_ehrenfest_time() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&config(Scenario::Dilation, dir.path(), &[Diagnostic::Moments])).unwrap();
    let rows = read_csv(&dir.path().join("moments.csv"));
    let last = rows.last().unwrap();
    assert!((last[0] - 0.5 * 1e3f64.ln()).abs() < 1e-12);
    assert!((last[3] - 0.5f64.sqrt()).abs() < 1e-6, "delta_q = {}", last[3]);
    assert_eq!(manifest.files, vec!["evolution.csv", "moments.csv"]);
    assert_eq!(RunManifest::read(dir.path()).unwrap().status, Status::Completed);
}

#[test]
fn harmonic_period_returns_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Scenario::Harmonic, dir.path(), &[Diagnostic::Revivals]);
    c.t_final = Some(TimeSpec::Value(2.0 * std::f64::consts::PI));
    run(&c).unwrap();
    let text = std::fs::read_to_string(dir.path().join("revivals.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let height = v["peak"]["height"].as_f64().unwrap();
    assert!((height - 1.0).abs() < 1e-4, "height {height}");
    assert!((v["peak"]["time"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn identical_configs_give_identical_files() {
    let all = [
        Diagnostic::Moments,
        Diagnostic::Husimi,
        Diagnostic::CoherentFit,
        Diagnostic::Egorov,
        Diagnostic::Revivals,
        Diagnostic::TubeMass,
        Diagnostic::MeasurementSamples,
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let make = |dir: &Path| ExperimentConfig {
        hbar: HbarSpec::Single(1e-2),
        t_final: Some(TimeSpec::Value(1.0)),
        start: Some(PhaseSpacePoint::new(0.3, 0.1)),
        snapshot_stride: 250,
        seed: 42,
        sample_count: 500,
        write_snapshots: true,
        ..config(Scenario::DoubleWell, dir, &all)
    };
    let ma = run(&make(a.path())).unwrap();
    let mb = run(&make(b.path())).unwrap();
    assert_eq!(ma.files, mb.files);
    assert!(ma.files.iter().any(|f| f == "samples.csv") && ma.files.iter().any(|f| f == "snap_1000.csv"));
    for f in &ma.files {
        assert!(a.path().join(f).exists(), "{f} listed but missing");
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let samples = read_csv(&a.path().join("samples.csv"));
    assert_eq!(samples.len(), 500);

    let c = tempfile::tempdir().unwrap();
    let mut other_seed = make(c.path());
    other_seed.seed = 43;
    other_seed.diagnostics = [Diagnostic::MeasurementSamples].into_iter().collect();
    run(&other_seed).unwrap();
    assert_ne!(
        std::fs::read(other_seed.output_dir.join("samples.csv")).unwrap(),
        std::fs::read(a.path().join("samples.csv")).unwrap()
    );
}

#[test]
fn snapshots_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        hbar: HbarSpec::Single(1e-2),
        t_final: Some(TimeSpec::Value(0.5)),
        snapshot_stride: 250,
        write_snapshots: true,
        ..config(Scenario::Free, dir.path(), &[])
    };
    let m = run(&c).unwrap();
    assert_eq!(m.files, vec!["evolution.csv", "snap_0.csv", "snap_250.csv", "snap_500.csv"]);
    let psi = ehrenfest_core::io::read_snapshot(&dir.path().join("snap_500.csv")).unwrap();
    let mean = ehrenfest_core::moments(&psi).unwrap().mean_q;
    assert!((mean - 0.5).abs() < 1e-10);
    let evolution = read_csv(&dir.path().join("evolution.csv"));
    assert_eq!(evolution.len(), 501);
    assert_eq!(evolution.last().unwrap()[0], 0.5);
}

#[test]
fn double_well_fit_residual_scales_as_sqrt_hbar() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        hbar: HbarSpec::List(vec![1e-2, 1e-3, 1e-4]),
        t_final: Some(TimeSpec::Value(1.0)),
        start: Some(PhaseSpacePoint::new(0.5, 0.0)),
        ..config(Scenario::DoubleWell, dir.path(), &[Diagnostic::CoherentFit])
    };
    let m = sweep(&c).unwrap();
    let e = exponent(dir.path(), "scaling_coherent_fit");
    assert!((e - 0.5).abs() <= 0.15, "exponent {e}");
    assert_eq!(m.files, vec!["scaling_coherent_fit.csv", "scaling_coherent_fit.json"]);
    assert_eq!(read_csv(&dir.path().join("scaling_coherent_fit.csv")).len(), 3);
}

#[test]
fn dilation_spread_at_half_ehrenfest_time_is_scale_free() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        hbar: HbarSpec::List(vec![1e-2, 1e-3, 1e-4]),
        ..config(Scenario::Dilation, dir.path(), &[Diagnostic::Moments])
    };
    sweep(&c).unwrap();
    let e = exponent(dir.path(), "scaling_moments");
    assert!(e.abs() <= 0.05, "exponent {e}");
}

#[test]
fn sweeps_need_several_hbar_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Scenario::DoubleWell, dir.path(), &[Diagnostic::CoherentFit]);
    c.hbar = HbarSpec::List(vec![1e-3]);
    let err = sweep(&c).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn numerical_failure_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // The packet runs into the edge of a deliberately small grid.
    let c = ExperimentConfig {
        hbar: HbarSpec::Single(1e-2),
        grid: Some(ehrenfest_core::GridSpec::symmetric(3.0, 1024).unwrap()),
        start: Some(PhaseSpacePoint::new(0.0, 2.0)),
        t_final: Some(TimeSpec::Value(1.4)),
        ..config(Scenario::Free, dir.path(), &[])
    };
    let err = run(&c).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    let m = RunManifest::read(dir.path()).unwrap();
    assert_eq!(m.status, Status::Failed);
    assert_eq!(m.exit_code, Some(3));
    assert!(m.files.is_empty());
}
