//! Front location, delay against the linear front `√2 t`, and delay-model fits.

use std::f64::consts::SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{interpolate, Domain, ScalarField};
use crate::stats::{linear_fit, rms};

/// Fewest samples a fit window may hold.
pub const MIN_WINDOW_SAMPLES: usize = 20;

/// Relative residual margin one model needs over the other to be preferred.
pub const PREFERENCE_MARGIN: f64 = 0.2;

/// Rightmost `x` where the linearly interpolated field crosses `level` downward.
pub fn front_location(field: &ScalarField, level: f64) -> Result<f64> {
    front_location_in(&field.domain, &field.values, level)
}

pub(crate) fn front_location_in(domain: &Domain, values: &[f64], level: f64) -> Result<f64> {
    let last = *values.last().ok_or(Error::NoCrossing { level })?;
    if !(level > 0.0) || last >= level {
        return Err(Error::NoCrossing { level });
    }
    let i = values
        .iter()
        .rposition(|v| *v >= level)
        .ok_or(Error::NoCrossing { level })?;
    let (hi, lo) = (values[i], values[i + 1]);
    let w = (hi - level) / (hi - lo);
    Ok(domain.x(i) + w * domain.dx())
}

/// `t · u(t, √2 t + ln t / (2√2))`; a bounded sequence in `t` when `u` decays ahead of
/// the front at the expected rate.
pub fn ahead_of_front_probe(field: &ScalarField) -> Result<f64> {
    let t = field.time;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "time",
            value: t,
            reason: "probe needs t > 0".into(),
        });
    }
    let x = SQRT_2 * t + t.ln() / (2.0 * SQRT_2);
    let d = &field.domain;
    if !d.contains(x) {
        return Err(Error::OutOfDomain {
            x,
            x_lo: d.x_lo,
            x_hi: d.x_hi,
        });
    }
    Ok(t * interpolate(d, &field.values, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl FitWindow {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < t_max && t_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_min",
                value: t_min,
                reason: format!("window needs 0 < t_min < t_max (t_max = {t_max})"),
            });
        }
        Ok(Self { t_min, t_max })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    fn select(&self, samples: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (t, y): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|(t, y)| self.contains(*t) && y.is_finite())
            .copied()
            .unzip();
        if t.len() < MIN_WINDOW_SAMPLES {
            return Err(Error::DegenerateWindow {
                found: t.len(),
                required: MIN_WINDOW_SAMPLES,
            });
        }
        Ok((t, y))
    }
}

/// Front location `X(t)` for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub level: f64,
    pub samples: Vec<(f64, f64)>,
}

impl FrontTrace {
    pub fn new(level: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: level,
                reason: "times must be strictly increasing".into(),
            });
        }
        if let Some((_, x)) = samples.iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: *x,
                reason: "front locations must be finite".into(),
            });
        }
        Ok(Self { level, samples })
    }

    /// Build from possibly missing (NaN) locations, dropping them.
    pub fn from_partial(level: f64, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(
            level,
            samples.into_iter().filter(|(_, x)| x.is_finite()).collect(),
        )
    }
}

/// `d(t) = √2 t − X(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySeries {
    pub level: f64,
    pub samples: Vec<(f64, f64)>,
}

impl DelaySeries {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,d")?;
        for (t, d) in &self.samples {
            writeln!(w, "{t},{d}")?;
        }
        Ok(())
    }

    /// `(ln t, d)` pairs for a straight-line view of the logarithmic model.
    pub fn write_log_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "ln_t,d")?;
        for (t, d) in self.samples.iter().filter(|(t, _)| *t > 0.0) {
            writeln!(w, "{},{d}", t.ln())?;
        }
        Ok(())
    }
}

pub fn delay_series(trace: &FrontTrace) -> DelaySeries {
    DelaySeries {
        level: trace.level,
        samples: trace
            .samples
            .iter()
            .map(|(t, x)| (*t, SQRT_2 * t - x))
            .collect(),
    }
}

/// `d ≈ slope · ln t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub samples: usize,
}

/// `d ≈ amplitude · t^exponent + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub offset: f64,
    pub rms: f64,
    pub samples: usize,
}

pub fn fit_log(series: &DelaySeries, window: FitWindow) -> Result<LogFit> {
    let (t, d) = window.select(&series.samples)?;
    let lt: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let line = linear_fit(&lt, &d);
    let rms = rms(lt.iter().zip(&d).map(|(x, y)| y - line.eval(*x)));
    Ok(LogFit {
        slope: line.slope,
        intercept: line.intercept,
        rms,
        samples: t.len(),
    })
}

/// Offsets are profiled through the gap `g = min d − b`, on a log grid over this many
/// decades below the data's spread `S`, up to `10 S`.
const GAP_DECADES_BELOW: f64 = 6.0;
const GAP_DECADES_ABOVE: f64 = 1.0;
const GAP_GRID_POINTS: usize = 141;

pub fn fit_power(series: &DelaySeries, window: FitWindow) -> Result<PowerFit> {
    let (t, d) = window.select(&series.samples)?;
    let lt: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (d_max - d_min)
        .max(1e-12 * d_max.abs())
        .max(f64::MIN_POSITIVE);

    let evaluate = |log_gap: f64| -> Option<PowerFit> {
        let offset = d_min - spread * 10f64.powf(log_gap);
        let ly: Vec<f64> = d.iter().map(|v| (v - offset).ln()).collect();
        if ly.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let line = linear_fit(&lt, &ly);
        let amplitude = line.intercept.exp();
        let exponent = line.slope;
        let rms = rms(t
            .iter()
            .zip(&d)
            .map(|(t, v)| v - (amplitude * t.powf(exponent) + offset)));
        rms.is_finite().then_some(PowerFit {
            amplitude,
            exponent,
            offset,
            rms,
            samples: t.len(),
        })
    };

    let step = (GAP_DECADES_BELOW + GAP_DECADES_ABOVE) / (GAP_GRID_POINTS - 1) as f64;
    let grid: Vec<(f64, Option<PowerFit>)> = (0..GAP_GRID_POINTS)
        .map(|k| {
            let g = -GAP_DECADES_BELOW + k as f64 * step;
            (g, evaluate(g))
        })
        .collect();
    let (best_k, _) = grid
        .iter()
        .enumerate()
        .filter_map(|(k, (_, f))| f.map(|f| (k, f.rms)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::PowerModelInapplicable)?;

    // Golden-section refinement between the neighbours of the best grid point.
    let lo = grid[best_k.saturating_sub(1)].0;
    let hi = grid[(best_k + 1).min(GAP_GRID_POINTS - 1)].0;
    let score = |g: f64| evaluate(g).map_or(f64::INFINITY, |f| f.rms);
    let g = golden_min(score, lo, hi, 1e-13);
    let refined = evaluate(g);
    let best = grid[best_k].1.expect("best grid point evaluated");
    Ok(match refined {
        Some(r) if r.rms <= best.rms => r,
        _ => best,
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPreference {
    Log,
    Power,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub level: f64,
    pub window: FitWindow,
    pub log: LogFit,
    /// Missing when the power model is inapplicable to the data.
    pub power: Option<PowerFit>,
    pub preference: ModelPreference,
}

pub fn model_select(series: &DelaySeries, window: FitWindow) -> Result<FitReport> {
    let log = fit_log(series, window)?;
    let power = match fit_power(series, window) {
        Ok(p) => Some(p),
        Err(Error::PowerModelInapplicable) => None,
        Err(e) => return Err(e),
    };
    let preference = match power {
        None => ModelPreference::Log,
        Some(p) => prefer(log.rms, p.rms),
    };
    Ok(FitReport {
        level: series.level,
        window,
        log,
        power,
        preference,
    })
}

fn prefer(log_rms: f64, power_rms: f64) -> ModelPreference {
    let margin = 1.0 - PREFERENCE_MARGIN;
    if log_rms < margin * power_rms {
        ModelPreference::Log
    } else if power_rms < margin * log_rms {
        ModelPreference::Power
    } else {
        ModelPreference::Inconclusive
    }
}

/// Least-squares slope of `X(t)` against `t` over the window.
pub fn speed_estimate(trace: &FrontTrace, window: FitWindow) -> Result<f64> {
    let (t, x) = window.select(&trace.samples)?;
    Ok(linear_fit(&t, &x).slope)
}
