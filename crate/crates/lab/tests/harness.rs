use std::f64::consts::SQRT_2;
use std::fs;
use std::path::Path;
use std::time::Instant;

use fkpp_core::feynman_kac::FieldOracle;
use fkpp_core::front::{FitWindow, ModelPreference};
use fkpp_core::solver::TraceRow;
use fkpp_lab::config::FkSection;
use fkpp_lab::fk::{cmd_fk_validate, evaluate_probes};
use fkpp_lab::front_cmd::cmd_front;
use fkpp_lab::report::cmd_report;
use fkpp_lab::simulate::{cmd_simulate, read_oracle, write_oracle, ORACLE_FILE, TRACE_FILE};
use fkpp_lab::trace::{read_trace, write_trace};
use fkpp_lab::{ExperimentConfig, LabError};

const SMOKE: &str = r#"
name = "smoke"
seed = 3

[kernel]
type = "uniform"
half_width = 1.0

[domain]
margin = 30.0

[numerics]
dx = 0.1
dt = 0.05
t_final = 50.0

[output]
sample_interval = 0.1
levels = [0.5, 0.1]

[fit]
t_min = 10.0
t_max = 50.0

[fk]
t = 20.0
horizon = 2.0
n_paths = 2000
probes = [20.0, 24.0]
"#;

fn smoke() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMOKE).unwrap()
}

fn write_synthetic_trace(path: &Path, front: impl Fn(f64) -> f64) {
    let rows: Vec<TraceRow> = (1..=400)
        .map(|i| {
            let t = 10.0 * i as f64;
            TraceRow {
                t,
                fronts: vec![front(t)],
                max_u: 1.0,
                probe: f64::NAN,
            }
        })
        .collect();
    let mut buf = Vec::new();
    write_trace(&mut buf, "synthetic", 0, &[0.5], &rows).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn smoke_run_is_fast_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = smoke();
    let clock = Instant::now();
    let m = cmd_simulate(&cfg, &a).unwrap();
    assert!(clock.elapsed().as_secs_f64() < 10.0);
    assert!(m.aborted.is_none());
    assert_eq!(m.config_hash, cfg.hash());

    let trace = read_trace(&a.join(TRACE_FILE)).unwrap();
    assert!(trace.rows.len() >= 500);
    assert_eq!(trace.config_hash.as_deref(), Some(cfg.hash().as_str()));

    cmd_simulate(&cfg, &b).unwrap();
    for f in [
        "trace.csv",
        "snapshots.bin",
        "final.csv",
        "kernel.csv",
        "fk_oracle.bin",
        "config.toml",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    for f in ["trace.csv", "final.csv", "kernel.csv"] {
        let text = fs::read_to_string(a.join(f)).unwrap();
        assert!(
            text.starts_with(&format!("# config_hash={} seed=3", cfg.hash())),
            "{f}"
        );
    }
}

#[test]
fn large_time_step_is_rejected() {
    let text = SMOKE.replace("dt = 0.05", "dt = 0.5");
    assert!(matches!(
        ExperimentConfig::from_toml(&text),
        Err(LabError::Core(_) | LabError::Config(_))
    ));
}

#[test]
fn report_recomputes_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    cmd_simulate(&cfg, dir.path()).unwrap();
    let fk = cfg.fk.as_ref().unwrap();
    cmd_fk_validate(fk, &cfg.hash(), cfg.seed, dir.path()).unwrap();
    let report = cmd_report(dir.path()).unwrap();
    assert!(report.fk.is_some());

    let again = cmd_front(
        &dir.path().join(TRACE_FILE),
        cfg.fit_window().unwrap(),
        cfg.speed_window().unwrap(),
        &dir.path().join("again"),
    )
    .unwrap();
    assert_eq!(again.levels, report.front.levels);
    let trace = read_trace(&dir.path().join(TRACE_FILE)).unwrap();
    let bound = trace
        .rows
        .iter()
        .map(|r| r.max_u)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(bound, report.observed_bound);
    assert!(report
        .checks
        .iter()
        .any(|c| c.name == "completed" && c.passed));
}

#[test]
fn report_lists_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    match cmd_report(dir.path()) {
        Err(LabError::MissingArtifacts { missing, .. }) => {
            assert!(missing.contains(&"trace.csv".to_string()));
            assert!(missing.contains(&"manifest.json".to_string()));
        }
        other => panic!("expected missing artifacts, got {other:?}"),
    }
}

#[test]
fn exact_front_gives_root_two_and_no_delay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    write_synthetic_trace(&trace, |t| SQRT_2 * t);
    let w = FitWindow::new(300.0, 4000.0).unwrap();
    let r = cmd_front(&trace, w, w, dir.path()).unwrap();
    let level = &r.levels[0];
    assert!((level.speed - SQRT_2).abs() < 1e-12);
    let delay = fs::read_to_string(dir.path().join(&level.delay_csv)).unwrap();
    for line in delay.lines().skip(2) {
        let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(d.abs() < 1e-9);
    }
}

#[test]
fn power_front_gives_its_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    write_synthetic_trace(&trace, |t| SQRT_2 * t - 2.0 * t.powf(1.0 / 3.0) - 1.0);
    let w = FitWindow::new(300.0, 4000.0).unwrap();
    let r = cmd_front(&trace, w, w, dir.path()).unwrap();
    let fit = &r.levels[0].fit;
    assert_eq!(fit.preference, ModelPreference::Power);
    assert!((fit.power.unwrap().exponent - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn unit_oracle_gives_zero_scores() {
    let oracle = FieldOracle::constant(-40.0, 0.1, 801, 0.0, 10.0, 1.0).unwrap();
    let fk = FkSection {
        t: 10.0,
        horizon: 5.0,
        n_paths: 1000,
        path_dt: 0.01,
        probes: (0..10).map(|i| -5.0 + i as f64).collect(),
    };
    let rows = evaluate_probes(&oracle, &fk, 1).unwrap();
    assert!(rows.iter().all(|r| r.z == 0.0 && r.estimate.mean == 1.0));
}

#[test]
fn oracle_file_round_trip_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(ORACLE_FILE);
    let oracle = FieldOracle::constant(-40.0, 0.1, 801, 6.0, 10.0, 0.5).unwrap();
    write_oracle(&oracle, &path).unwrap();
    assert_eq!(read_oracle(&path).unwrap(), oracle);

    let fk = FkSection {
        t: 10.0,
        horizon: 5.0,
        n_paths: 1000,
        path_dt: 0.01,
        probes: vec![0.0],
    };
    let err = cmd_fk_validate(&fk, "h", 0, dir.path()).unwrap_err();
    assert!(
        matches!(err, LabError::Core(fkpp_core::Error::OracleCoverage { .. })),
        "{err}"
    );

    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        cmd_fk_validate(&fk, "h", 0, empty.path()),
        Err(LabError::MissingArtifacts { .. })
    ));
}
