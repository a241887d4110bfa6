//! Brownian bridge and Brownian tube probabilities: closed forms, series, and Monte Carlo
//! estimators with analytic crossing corrections between grid points.

use std::f64::consts::PI;
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::rng::path_stream;
use crate::stats::{linear_fit, mean_and_se};

/// Fewest time steps for a bridge simulation.
pub const MIN_BRIDGE_STEPS: usize = 64;

/// Fewest surviving paths required at every time of a tube fit.
pub const MIN_TUBE_HITS: usize = 50;

const SERIES_MIN_TIME: f64 = 0.1;
const SERIES_TOLERANCE: f64 = 1e-15;

/// A bridge of length `t` from 0 to 0 and the line it must stay above, which sits
/// `y2` below the start and `y1` below the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierLine {
    pub y1: f64,
    pub y2: f64,
    pub t: f64,
}

impl BarrierLine {
    pub fn new(y1: f64, y2: f64, t: f64) -> Result<Self> {
        ensure_positive("y1", y1)?;
        ensure_positive("y2", y2)?;
        ensure_positive("t", t)?;
        Ok(Self { y1, y2, t })
    }

    /// Distance from the line to the bridge value `xi` at time `s`.
    fn clearance(&self, s: f64, xi: f64) -> f64 {
        xi + (s / self.t) * self.y1 + ((self.t - s) / self.t) * self.y2
    }
}

/// A band of half-width `r0` around the line `b·s`, run for time `t`, with the path
/// required to end within `window` of the centre line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeSpec {
    pub r0: f64,
    pub slope: f64,
    pub window: f64,
}

impl TubeSpec {
    pub fn new(r0: f64, slope: f64, window: f64) -> Result<Self> {
        ensure_positive("r0", r0)?;
        ensure_positive("window", window)?;
        if window > r0 {
            return Err(Error::InvalidParameter {
                name: "window",
                value: window,
                reason: format!("must not exceed r0 = {r0}"),
            });
        }
        if !slope.is_finite() {
            return Err(Error::InvalidParameter {
                name: "slope",
                value: slope,
                reason: "must be finite".into(),
            });
        }
        Ok(Self { r0, slope, window })
    }

    /// Asymptotic decay rate of the survival probability, `b²/2 + π²/(8 r0²)`.
    pub fn decay_rate(&self) -> f64 {
        0.5 * self.slope * self.slope + PI * PI / (8.0 * self.r0 * self.r0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
}

impl EstimateWithCI {
    /// `(mean − reference) / standard_error`, zero when both the error and the
    /// difference vanish.
    pub fn zscore(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if self.standard_error > 0.0 {
            diff / self.standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// `1 − exp(−2 y1 y2 / t)`.
pub fn bridge_above_line_exact(barrier: &BarrierLine) -> f64 {
    -(-2.0 * barrier.y1 * barrier.y2 / barrier.t).exp_m1()
}

/// Probability that a Brownian bridge of length `dt` between two points at distances
/// `a` and `b` above a line never touches it.
fn no_crossing(a: f64, b: f64, dt: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        -(-2.0 * a * b / dt).exp_m1()
    }
}

/// Monte Carlo estimate of [`bridge_above_line_exact`]. With `correction` each path
/// carries the exact probability of not crossing between grid points; without it only
/// the grid values are checked, which overestimates survival.
pub fn bridge_stay_mc(
    barrier: &BarrierLine,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    correction: bool,
) -> Result<EstimateWithCI> {
    if n_steps < MIN_BRIDGE_STEPS {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            value: n_steps as f64,
            reason: format!("at least {MIN_BRIDGE_STEPS} steps required"),
        });
    }
    ensure_positive("n_paths", n_paths as f64)?;
    let dt = barrier.t / n_steps as f64;
    let sd = dt.sqrt();
    let weights: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_steps + 1],
            |walk, p| {
                let mut rng = path_stream(seed, p);
                for k in 1..=n_steps {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    walk[k] = walk[k - 1] + sd * z;
                }
                let end = walk[n_steps];
                let mut weight = 1.0;
                let mut prev = barrier.y2;
                for (k, w) in walk.iter().enumerate().skip(1) {
                    let frac = k as f64 / n_steps as f64;
                    let xi = w - frac * end;
                    let next = barrier.clearance(frac * barrier.t, xi);
                    if next <= 0.0 {
                        return 0.0;
                    }
                    if correction {
                        weight *= no_crossing(prev, next, dt);
                    }
                    prev = next;
                }
                weight
            },
        )
        .collect();
    let (mean, standard_error) = mean_and_se(&weights);
    Ok(EstimateWithCI {
        mean,
        standard_error,
        n_paths,
        n_steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTail {
    /// `P(Z > x)`.
    pub exact: f64,
    /// `exp(−x²/2)`.
    pub chernoff: f64,
    /// `exp(−x²/2) / (x √(2π))`.
    pub mills: f64,
}

pub fn gaussian_tail(x: f64) -> Result<GaussianTail> {
    ensure_positive("x", x)?;
    let chernoff = (-0.5 * x * x).exp();
    Ok(GaussianTail {
        exact: 0.5 * libm::erfc(x / std::f64::consts::SQRT_2),
        chernoff,
        mills: chernoff / (x * (2.0 * PI).sqrt()),
    })
}

/// `P(|B(s)| ≤ 1 for all s ≤ t)` from the eigenfunction series of the interval.
pub fn interval_survival_exact(t: f64) -> Result<f64> {
    if !(t > SERIES_MIN_TIME) || !t.is_finite() {
        return Err(Error::SeriesRegime(t));
    }
    let mut sum = 0.0;
    for n in 0.. {
        let m = (2 * n + 1) as f64;
        let term = 4.0 / (m * PI) * (-m * m * PI * PI * t / 8.0).exp();
        sum += if n % 2 == 0 { term } else { -term };
        if term < SERIES_TOLERANCE * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// Survival estimates for a tube at each time of `times` (sorted), from one set of
/// paths. Each path carries the exact single-wall no-crossing probability for both walls
/// between grid points.
pub fn tube_survival_mc(
    tube: &TubeSpec,
    times: &[f64],
    n_paths: usize,
    path_dt: f64,
    seed: u64,
) -> Result<Vec<(f64, EstimateWithCI, usize)>> {
    ensure_positive("path_dt", path_dt)?;
    ensure_positive("n_paths", n_paths as f64)?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::InvalidParameter {
            name: "times",
            value: times.first().copied().unwrap_or(f64::NAN),
            reason: "need a non-empty, increasing list of positive times".into(),
        });
    }
    let marks: Vec<usize> = times
        .iter()
        .map(|t| ((t / path_dt).round() as usize).max(1))
        .collect();
    let steps = *marks.last().expect("non-empty");
    let sd = path_dt.sqrt();
    let drift = tube.slope * path_dt;

    // Per path, the weight recorded at each mark (zero once killed).
    let rows: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_stream(seed, p);
            let mut out = vec![0.0; marks.len()];
            let mut w = 0.0f64;
            let mut weight = 1.0;
            let mut next_mark = 0;
            for k in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                let prev = w;
                w += sd * z - drift;
                if w.abs() >= tube.r0 {
                    return out;
                }
                weight *= no_crossing(tube.r0 - prev, tube.r0 - w, path_dt)
                    * no_crossing(tube.r0 + prev, tube.r0 + w, path_dt);
                while next_mark < marks.len() && marks[next_mark] == k {
                    if w.abs() <= tube.window {
                        out[next_mark] = weight;
                    }
                    next_mark += 1;
                }
            }
            out
        })
        .collect();

    Ok(marks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let hits = column.iter().filter(|v| **v > 0.0).count();
            let (mean, standard_error) = mean_and_se(&column);
            (
                k as f64 * path_dt,
                EstimateWithCI {
                    mean,
                    standard_error,
                    n_paths,
                    n_steps: k,
                },
                hits,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeFit {
    /// Fitted slope of `−ln P(t)` against `t`.
    pub rate: f64,
    pub intercept: f64,
    pub points: Vec<(f64, EstimateWithCI)>,
}

/// Fit the exponential decay rate of the tube survival probability over `times`.
pub fn tube_decay_rate_mc(
    tube: &TubeSpec,
    times: &[f64],
    n_paths: usize,
    path_dt: f64,
    seed: u64,
) -> Result<TubeFit> {
    let est = tube_survival_mc(tube, times, n_paths, path_dt, seed)?;
    if let Some((t, _, hits)) = est.iter().find(|(_, _, h)| *h < MIN_TUBE_HITS) {
        return Err(Error::InsufficientHits {
            hits: *hits,
            time: *t,
            required: MIN_TUBE_HITS,
        });
    }
    let t: Vec<f64> = est.iter().map(|(t, _, _)| *t).collect();
    let y: Vec<f64> = est.iter().map(|(_, e, _)| -e.mean.ln()).collect();
    let line = linear_fit(&t, &y);
    Ok(TubeFit {
        rate: line.slope,
        intercept: line.intercept,
        points: est.into_iter().map(|(t, e, _)| (t, e)).collect(),
    })
}

/// The 12 barrier configurations of the default validation grid.
pub fn default_validation_grid() -> Vec<BarrierLine> {
    let triples = [
        (1.0, 1.0, 2.0),
        (3.0, 2.0, 4.0),
        (0.5, 0.5, 1.0),
        (0.25, 1.0, 1.0),
        (1.0, 0.25, 1.0),
        (0.5, 2.0, 3.0),
        (1.0, 1.0, 10.0),
        (2.0, 1.5, 5.0),
        (0.3, 0.3, 0.5),
        (1.5, 0.5, 2.0),
        (0.1, 2.0, 1.0),
        (2.0, 2.0, 8.0),
    ];
    triples
        .iter()
        .map(|&(a, b, t)| BarrierLine { y1: a, y2: b, t })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeRow {
    pub barrier: BarrierLine,
    pub exact: f64,
    pub estimate: EstimateWithCI,
    pub z: f64,
}

/// Exact versus simulated survival for every barrier; row `i` uses its own seed derived
/// from `(seed, i)`.
pub fn validate_bridges(
    grid: &[BarrierLine],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    correction: bool,
) -> Result<Vec<BridgeRow>> {
    grid.iter()
        .enumerate()
        .map(|(i, barrier)| {
            let row_seed = seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let estimate = bridge_stay_mc(barrier, n_paths, n_steps, row_seed, correction)?;
            let exact = bridge_above_line_exact(barrier);
            Ok(BridgeRow {
                barrier: *barrier,
                exact,
                estimate,
                z: estimate.zscore(exact),
            })
        })
        .collect()
}

pub fn write_bridge_csv(rows: &[BridgeRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "y1,y2,t,exact,mc_mean,mc_se,z")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.barrier.y1,
            r.barrier.y2,
            r.barrier.t,
            r.exact,
            r.estimate.mean,
            r.estimate.standard_error,
            r.z
        )?;
    }
    Ok(())
}
