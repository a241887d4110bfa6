//! `report`: consolidate a run directory and check the configured thresholds.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fkpp_core::front::ModelPreference;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Regime};
use crate::error::{IoContext, LabError, Result};
use crate::fk::{MAX_OUTLIERS, PROBE_FILE};
use crate::front_cmd::{cmd_front, FrontReport};
use crate::simulate::{
    read_manifest, Manifest, CONFIG_ECHO, MANIFEST_FILE, ORACLE_FILE, TRACE_FILE,
};
use crate::trace::{read_trace, TraceFile};

pub const RUN_REPORT: &str = "run_report.json";
pub const SUMMARY_TXT: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkSummary {
    pub probes: usize,
    pub outliers: usize,
    pub max_abs_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub manifest: Manifest,
    /// Largest `max_u` in the trace.
    pub observed_bound: f64,
    pub front: FrontReport,
    /// `t · u` ahead of the front: value at the start of the checked range and the
    /// largest value after it.
    pub probe_start: Option<(f64, f64)>,
    pub probe_max: Option<f64>,
    pub fk: Option<FkSummary>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

fn check(name: impl Into<String>, value: f64, target: impl Into<String>, passed: bool) -> Check {
    Check {
        name: name.into(),
        value,
        target: target.into(),
        passed,
    }
}

fn in_range(v: f64, [lo, hi]: [f64; 2]) -> bool {
    v >= lo && v <= hi
}

/// Probe value at the first sample at or after `t_min` and the largest value from there on.
pub fn probe_growth(trace: &TraceFile, t_min: f64) -> Option<((f64, f64), f64)> {
    let mut rows = trace
        .rows
        .iter()
        .filter(|r| r.t >= t_min - 1e-9 && r.probe.is_finite());
    let first = rows.next()?;
    let max = rows.fold(first.probe, |m, r| m.max(r.probe));
    Some(((first.t, first.probe), max))
}

pub fn read_probe_z(path: &Path) -> Result<Vec<f64>> {
    let malformed = |reason: String| LabError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| malformed(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "z")
        .ok_or_else(|| malformed("no `z` column".into()))?;
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| malformed(e.to_string()))?;
            r[col].parse::<f64>().map_err(|e| malformed(e.to_string()))
        })
        .collect()
}

fn missing_artifacts(dir: &Path, cfg: Option<&ExperimentConfig>) -> Vec<String> {
    let mut required = vec![CONFIG_ECHO, MANIFEST_FILE, TRACE_FILE];
    if cfg.is_some_and(|c| c.fk.is_some()) {
        required.push(ORACLE_FILE);
    }
    required
        .into_iter()
        .filter(|f| !dir.join(f).exists())
        .map(str::to_string)
        .collect()
}

/// Rebuild the report for `dir` from its files, write `run_report.json` and
/// `summary.txt`, and return it.
pub fn cmd_report(dir: &Path) -> Result<RunReport> {
    let cfg_path = dir.join(CONFIG_ECHO);
    let cfg = cfg_path
        .exists()
        .then(|| ExperimentConfig::load(&cfg_path))
        .transpose()?;
    let missing = missing_artifacts(dir, cfg.as_ref());
    if !missing.is_empty() {
        return Err(LabError::MissingArtifacts {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let cfg = cfg.expect("checked above");
    let manifest = read_manifest(dir)?;
    let trace = read_trace(&dir.join(TRACE_FILE))?;
    let front = cmd_front(
        &dir.join(TRACE_FILE),
        cfg.fit_window()?,
        cfg.speed_window()?,
        dir,
    )?;

    let observed_bound = trace
        .rows
        .iter()
        .map(|r| r.max_u)
        .fold(f64::NEG_INFINITY, f64::max);
    let finite = trace.rows.iter().all(|r| r.max_u.is_finite());
    let fk = if dir.join(PROBE_FILE).exists() {
        let z = read_probe_z(&dir.join(PROBE_FILE))?;
        Some(FkSummary {
            probes: z.len(),
            outliers: z.iter().filter(|z| z.abs() > 3.0).count(),
            max_abs_z: z.iter().fold(0.0, |m, z| m.max(z.abs())),
        })
    } else {
        None
    };

    let mut checks = vec![check(
        "completed",
        manifest.t_reached,
        format!("run reaches t = {} without abort", cfg.numerics.t_final),
        manifest.aborted.is_none(),
    )];
    let mut probe_start = None;
    let mut probe_max = None;
    if let Some(e) = &cfg.expect {
        if let Some(m) = e.max_u {
            checks.push(check(
                "max_u",
                observed_bound,
                format!("finite and ≤ {m}"),
                finite && observed_bound <= m,
            ));
        }
        for l in &front.levels {
            if let Some(tol) = e.speed_tolerance {
                checks.push(check(
                    format!("speed@{}", l.level),
                    l.speed,
                    format!("√2 ± {tol}"),
                    (l.speed - SQRT_2).abs() <= tol,
                ));
            }
            let (wanted, label) = match e.regime {
                Regime::Log => (ModelPreference::Log, "log"),
                Regime::Power => (ModelPreference::Power, "power"),
            };
            let pref = l.fit.preference;
            checks.push(check(
                format!("preference@{}", l.level),
                f64::NAN,
                format!("{label} (got {pref:?})"),
                pref == wanted,
            ));
            if let Some(r) = e.log_slope {
                let s = l.fit.log.slope;
                checks.push(check(
                    format!("log_slope@{}", l.level),
                    s,
                    format!("in [{}, {}]", r[0], r[1]),
                    in_range(s, r),
                ));
            }
            if let Some(r) = e.beta {
                let b = l.fit.power.map_or(f64::NAN, |p| p.exponent);
                checks.push(check(
                    format!("beta@{}", l.level),
                    b,
                    format!("in [{}, {}]", r[0], r[1]),
                    in_range(b, r),
                ));
            }
        }
        if let (Some(g), Some(t0)) = (e.probe_growth, e.probe_t_min) {
            match probe_growth(&trace, t0) {
                Some((start, max)) => {
                    probe_start = Some(start);
                    probe_max = Some(max);
                    checks.push(check(
                        "probe_growth",
                        max / start.1,
                        format!("≤ {g} × value at t = {}", start.0),
                        max <= g * start.1,
                    ));
                }
                None => checks.push(check(
                    "probe_growth",
                    f64::NAN,
                    "probe samples present",
                    false,
                )),
            }
        }
    }
    if let Some(f) = &fk {
        checks.push(check(
            "fk_outliers",
            f.outliers as f64,
            format!("≤ {MAX_OUTLIERS} probes with |z| > 3"),
            f.outliers <= MAX_OUTLIERS,
        ));
    }

    let all_passed = checks.iter().all(|c| c.passed);
    let report = RunReport {
        config: cfg,
        manifest,
        observed_bound,
        front,
        probe_start,
        probe_max,
        fk,
        checks,
        all_passed,
    };
    let path = dir.join(RUN_REPORT);
    fs::write(&path, serde_json::to_string_pretty(&report)?).at(&path)?;
    let path = dir.join(SUMMARY_TXT);
    fs::write(&path, summary(&report)).at(&path)?;
    Ok(report)
}

pub fn summary(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "run {} (config {}, seed {})",
        r.config.name, r.manifest.config_hash, r.manifest.seed
    );
    let _ = writeln!(
        s,
        "t = {} in {} steps, {:.1} s, sup u = {:.6}",
        r.manifest.t_reached, r.manifest.steps, r.manifest.wall_clock_s, r.observed_bound
    );
    for l in &r.front.levels {
        let _ = write!(
            s,
            "level {}: speed {:.5}, log slope {:.4} (rms {:.3e})",
            l.level, l.speed, l.fit.log.slope, l.fit.log.rms
        );
        if let Some(p) = l.fit.power {
            let _ = write!(s, ", power exponent {:.4} (rms {:.3e})", p.exponent, p.rms);
        }
        let _ = writeln!(s, ", prefers {:?}", l.fit.preference);
    }
    if let Some(f) = &r.fk {
        let _ = writeln!(
            s,
            "feynman-kac: {} probes, {} with |z| > 3, max |z| {:.2}",
            f.probes, f.outliers, f.max_abs_z
        );
    }
    for c in &r.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "[{mark}] {}: {} (target {})", c.name, c.value, c.target);
    }
    s
}
