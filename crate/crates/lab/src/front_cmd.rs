//! `front`: speed, delay fits and model preference from a trace file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use fkpp_core::front::{
    delay_series, model_select, speed_estimate, FitReport, FitWindow, ModelPreference,
};
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};
use crate::trace::{provenance_line, read_trace};

pub const FRONT_REPORT: &str = "front_report.json";

/// Largest spread of log slopes across levels still counted as agreement.
pub const LOG_SLOPE_AGREEMENT: f64 = 0.2;
/// Largest spread of fitted exponents across levels still counted as agreement.
pub const EXPONENT_AGREEMENT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: f64,
    pub speed: f64,
    pub fit: FitReport,
    pub delay_csv: String,
    pub delay_log_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontReport {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub trace: String,
    pub speed_window: FitWindow,
    pub levels: Vec<LevelReport>,
    /// All levels prefer the same model with fitted parameters within tolerance.
    pub levels_agree: bool,
}

pub fn delay_file(level: f64) -> String {
    format!("delay_{level}.csv")
}

pub fn delay_log_file(level: f64) -> String {
    format!("delay_log_{level}.csv")
}

/// Analyse `trace` and write the report plus per-level delay CSVs to `out`.
pub fn cmd_front(
    trace: &Path,
    window: FitWindow,
    speed_window: FitWindow,
    out: &Path,
) -> Result<FrontReport> {
    let file = read_trace(trace)?;
    fs::create_dir_all(out).at(out)?;
    let header = provenance_line(
        file.config_hash.as_deref().unwrap_or("unknown"),
        file.seed.unwrap_or(0),
    );

    let mut levels = Vec::new();
    for i in 0..file.levels.len() {
        let front = file.front(i)?;
        let speed = speed_estimate(&front, speed_window)?;
        let series = delay_series(&front);
        let fit = model_select(&series, window)?;

        let delay_csv = delay_file(front.level);
        let path = out.join(&delay_csv);
        let mut w = BufWriter::new(File::create(&path).at(&path)?);
        writeln!(w, "{header}").at(&path)?;
        series.write_csv(&mut w).at(&path)?;
        w.flush().at(&path)?;

        let delay_log_csv = delay_log_file(front.level);
        let path = out.join(&delay_log_csv);
        let mut w = BufWriter::new(File::create(&path).at(&path)?);
        writeln!(w, "{header}").at(&path)?;
        series.write_log_csv(&mut w).at(&path)?;
        w.flush().at(&path)?;

        levels.push(LevelReport {
            level: front.level,
            speed,
            fit,
            delay_csv,
            delay_log_csv,
        });
    }

    let report = FrontReport {
        config_hash: file.config_hash,
        seed: file.seed,
        trace: trace.display().to_string(),
        speed_window,
        levels_agree: levels_agree(&levels),
        levels,
    };
    let path = out.join(FRONT_REPORT);
    fs::write(&path, serde_json::to_string_pretty(&report)?).at(&path)?;
    Ok(report)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

fn levels_agree(levels: &[LevelReport]) -> bool {
    let Some(first) = levels.first() else {
        return false;
    };
    let preference = first.fit.preference;
    if levels.iter().any(|l| l.fit.preference != preference) {
        return false;
    }
    match preference {
        ModelPreference::Log => {
            spread(levels.iter().map(|l| l.fit.log.slope)) <= LOG_SLOPE_AGREEMENT
        }
        ModelPreference::Power => {
            let exps: Option<Vec<f64>> = levels
                .iter()
                .map(|l| l.fit.power.map(|p| p.exponent))
                .collect();
            exps.is_some_and(|e| spread(e.into_iter()) <= EXPONENT_AGREEMENT)
        }
        ModelPreference::Inconclusive => false,
    }
}
