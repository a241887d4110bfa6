//! `bridge`: validate the bridge and tube estimators against their closed forms.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use fkpp_core::bridge::{
    default_validation_grid, gaussian_tail, interval_survival_exact, tube_decay_rate_mc,
    tube_survival_mc, validate_bridges, write_bridge_csv, BridgeRow, EstimateWithCI, TubeSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};
use crate::trace::provenance_line;

pub const BRIDGE_CSV: &str = "bridge_corrected.csv";
pub const BRIDGE_RAW_CSV: &str = "bridge_uncorrected.csv";
pub const GAUSSIAN_CSV: &str = "gaussian_tail.csv";
pub const TUBE_CSV: &str = "tube_survival.csv";
pub const BRIDGE_SUMMARY: &str = "bridge_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePlan {
    pub n_paths: usize,
    pub corrected_steps: usize,
    pub uncorrected_steps: usize,
    pub gaussian_points: usize,
    pub gaussian_range: [f64; 2],
    pub tube_paths: usize,
    pub tube_dt: f64,
    pub tubes: Vec<TubeCase>,
    /// Paths for the untilted tube at `t = 1` checked against the series.
    pub series_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeCase {
    pub r0: f64,
    pub slope: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl TubeCase {
    pub fn times(&self) -> Vec<f64> {
        let step = (self.t_max - self.t_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.t_min + i as f64 * step)
            .collect()
    }

    /// `b²/2 + π²/(8 R0²)`.
    pub fn expected_rate(&self) -> f64 {
        0.5 * self.slope * self.slope + PI * PI / (8.0 * self.r0 * self.r0)
    }
}

impl Default for BridgePlan {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            corrected_steps: 256,
            uncorrected_steps: 64,
            gaussian_points: 1000,
            gaussian_range: [0.01, 10.0],
            tube_paths: 200_000,
            tube_dt: 0.01,
            tubes: vec![
                TubeCase {
                    r0: 1.0,
                    slope: 0.0,
                    t_min: 0.5,
                    t_max: 5.0,
                    points: 10,
                },
                TubeCase {
                    r0: 1.0,
                    slope: 1.0,
                    t_min: 0.4,
                    t_max: 4.0,
                    points: 10,
                },
                TubeCase {
                    r0: 2.0,
                    slope: 0.0,
                    t_min: 2.0,
                    t_max: 20.0,
                    points: 10,
                },
            ],
            series_paths: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeResult {
    pub r0: f64,
    pub slope: f64,
    pub fitted_rate: f64,
    pub expected_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub t: f64,
    pub series: f64,
    pub estimate: EstimateWithCI,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSummary {
    pub seed: u64,
    pub plan: BridgePlan,
    /// Corrected cells with `|z| > 3`.
    pub corrected_outliers: usize,
    /// Uncorrected cells that overestimate survival by more than three standard errors.
    pub uncorrected_biased: usize,
    /// Grid points where the exact tail exceeds one of its bounds.
    pub gaussian_violations: usize,
    pub tubes: Vec<TubeResult>,
    pub series: SeriesCheck,
}

fn plan_hash(plan: &BridgePlan) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_string(plan).expect("plan serialises");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).at(path)?))
}

fn outliers(rows: &[BridgeRow]) -> usize {
    rows.iter().filter(|r| r.z.abs() > 3.0).count()
}

/// Run the full plan and write CSVs plus `bridge_summary.json` to `out`.
pub fn cmd_bridge(plan: &BridgePlan, seed: u64, out: &Path) -> Result<BridgeSummary> {
    fs::create_dir_all(out).at(out)?;
    let header = provenance_line(&plan_hash(plan), seed);
    let grid = default_validation_grid();

    let corrected = validate_bridges(&grid, plan.n_paths, plan.corrected_steps, seed, true)?;
    let raw = validate_bridges(&grid, plan.n_paths, plan.uncorrected_steps, seed, false)?;
    for (name, rows) in [(BRIDGE_CSV, &corrected), (BRIDGE_RAW_CSV, &raw)] {
        let path = out.join(name);
        let mut w = open(&path)?;
        writeln!(w, "{header}").at(&path)?;
        write_bridge_csv(rows, &mut w).at(&path)?;
        w.flush().at(&path)?;
    }

    let path = out.join(GAUSSIAN_CSV);
    let mut w = open(&path)?;
    writeln!(w, "{header}\nx,exact,chernoff,mills").at(&path)?;
    let [lo, hi] = plan.gaussian_range;
    let mut gaussian_violations = 0;
    for i in 0..plan.gaussian_points {
        let x = lo + (hi - lo) * i as f64 / (plan.gaussian_points - 1) as f64;
        let g = gaussian_tail(x)?;
        if g.exact > g.chernoff || g.exact > g.mills {
            gaussian_violations += 1;
        }
        writeln!(w, "{x},{},{},{}", g.exact, g.chernoff, g.mills).at(&path)?;
    }
    w.flush().at(&path)?;

    let path = out.join(TUBE_CSV);
    let mut w = open(&path)?;
    writeln!(w, "{header}\nr0,slope,t,mc_mean,mc_se").at(&path)?;
    let mut tubes = Vec::new();
    for (i, case) in plan.tubes.iter().enumerate() {
        let tube = TubeSpec::new(case.r0, case.slope, case.r0)?;
        let tube_seed = seed ^ (0x7475_6265 + i as u64);
        let fit = tube_decay_rate_mc(
            &tube,
            &case.times(),
            plan.tube_paths,
            plan.tube_dt,
            tube_seed,
        )?;
        for (t, e) in &fit.points {
            writeln!(
                w,
                "{},{},{t},{},{}",
                case.r0, case.slope, e.mean, e.standard_error
            )
            .at(&path)?;
        }
        tubes.push(TubeResult {
            r0: case.r0,
            slope: case.slope,
            fitted_rate: fit.rate,
            expected_rate: case.expected_rate(),
        });
    }
    w.flush().at(&path)?;

    let unit = TubeSpec::new(1.0, 0.0, 1.0)?;
    let (t, estimate, _) = tube_survival_mc(
        &unit,
        &[1.0],
        plan.series_paths,
        plan.tube_dt,
        seed ^ 0x7365_7269,
    )?[0];
    let series = interval_survival_exact(t)?;
    let series = SeriesCheck {
        t,
        series,
        estimate,
        z: estimate.zscore(series),
    };

    let summary = BridgeSummary {
        seed,
        plan: plan.clone(),
        corrected_outliers: outliers(&corrected),
        uncorrected_biased: raw.iter().filter(|r| r.z > 3.0).count(),
        gaussian_violations,
        tubes,
        series,
    };
    let path = out.join(BRIDGE_SUMMARY);
    fs::write(&path, serde_json::to_string_pretty(&summary)?).at(&path)?;
    Ok(summary)
}
