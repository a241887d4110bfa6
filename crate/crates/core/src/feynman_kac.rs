//! Monte Carlo evaluation of
//!
//! ```text
//! u(t, x) = E_x[ exp(∫₀^{t'} 1 − φ∗u(t − s, B(s)) ds) · u(t − t', B(t')) ]
//! ```
//!
//! against stored solver snapshots. Agreement with the grid value checks the solver and
//! the stored potential jointly.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::rng::path_stream;
use crate::solver::{Observer, StepView};
use crate::stats::mean_and_se;

/// Fraction of paths allowed to leave the stored spatial range before an estimate is
/// flagged.
pub const OUT_OF_RANGE_LIMIT: f64 = 1e-3;

/// Paths start at least this many `√t'` inside the stored range.
pub const START_MARGIN_SIGMAS: f64 = 6.0;

const TIME_SLACK: f64 = 1e-9;

/// Snapshots of `u` and `φ∗u` on a uniform grid of cell centers, interpolated linearly in
/// `x` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOracle {
    origin: f64,
    dx: f64,
    len: usize,
    times: Vec<f64>,
    u: Vec<Vec<f64>>,
    potential: Vec<Vec<f64>>,
}

impl FieldOracle {
    /// Empty oracle whose cell `i` sits at `origin + i·dx`.
    pub fn new(origin: f64, dx: f64, len: usize) -> Result<Self> {
        ensure_positive("dx", dx)?;
        if len < 2 {
            return Err(Error::InvalidParameter {
                name: "len",
                value: len as f64,
                reason: "oracle needs at least two cells".into(),
            });
        }
        Ok(Self {
            origin,
            dx,
            len,
            times: Vec::new(),
            u: Vec::new(),
            potential: Vec::new(),
        })
    }

    /// Oracle with `u ≡ value` and `φ∗u ≡ value` on `[t_lo, t_hi]`.
    pub fn constant(
        origin: f64,
        dx: f64,
        len: usize,
        t_lo: f64,
        t_hi: f64,
        value: f64,
    ) -> Result<Self> {
        let mut o = Self::new(origin, dx, len)?;
        o.push(t_lo, vec![value; len], vec![value; len])?;
        o.push(t_hi, vec![value; len], vec![value; len])?;
        Ok(o)
    }

    pub fn push(&mut self, t: f64, u: Vec<f64>, interaction: Vec<f64>) -> Result<()> {
        if u.len() != self.len || interaction.len() != self.len {
            return Err(Error::Format(format!(
                "snapshot of {} / {} cells for an oracle of {}",
                u.len(),
                interaction.len(),
                self.len
            )));
        }
        if self.times.last().is_some_and(|last| t <= *last) {
            return Err(Error::InvalidParameter {
                name: "t",
                value: t,
                reason: "oracle snapshots must be pushed in increasing time".into(),
            });
        }
        self.times.push(t);
        self.u.push(u);
        self.potential.push(interaction);
        Ok(())
    }

    /// Position of the first stored cell.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Cells per snapshot.
    pub fn cells(&self) -> usize {
        self.len
    }

    /// `(t, u, φ∗u)` for every stored snapshot in time order.
    pub fn records(&self) -> impl Iterator<Item = (f64, &[f64], &[f64])> {
        self.times
            .iter()
            .zip(&self.u)
            .zip(&self.potential)
            .map(|((t, u), c)| (*t, u.as_slice(), c.as_slice()))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.origin, self.origin + (self.len - 1) as f64 * self.dx)
    }

    pub fn t_range(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    pub fn snapshots(&self) -> usize {
        self.times.len()
    }

    fn check_coverage(&self, t_lo: f64, t_hi: f64) -> Result<()> {
        let (a, b) = self.t_range().unwrap_or((f64::NAN, f64::NAN));
        if !(a <= t_lo + TIME_SLACK && b >= t_hi - TIME_SLACK) {
            return Err(Error::OracleCoverage {
                t_lo: a,
                t_hi: b,
                need_lo: t_lo,
                need_hi: t_hi,
            });
        }
        Ok(())
    }

    pub fn u_at(&self, t: f64, x: f64) -> f64 {
        self.lookup(&self.u, t, x).max(0.0)
    }

    pub fn interaction_at(&self, t: f64, x: f64) -> f64 {
        self.lookup(&self.potential, t, x).max(0.0)
    }

    fn in_range(&self, x: f64) -> bool {
        let (a, b) = self.x_range();
        x >= a && x <= b
    }

    /// Bilinear lookup; `x` is clamped to the stored range and `t` to the stored times.
    fn lookup(&self, data: &[Vec<f64>], t: f64, x: f64) -> f64 {
        let s = ((x - self.origin) / self.dx).clamp(0.0, (self.len - 1) as f64);
        let i = (s.floor() as usize).min(self.len - 2);
        let wx = s - i as f64;
        let space = |row: &[f64]| row[i] + wx * (row[i + 1] - row[i]);
        let k = self.times.partition_point(|v| *v <= t);
        if k == 0 {
            return space(&data[0]);
        }
        if k == self.times.len() {
            return space(&data[k - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let wt = (t - t0) / (t1 - t0);
        let (a, b) = (space(&data[k - 1]), space(&data[k]));
        a + wt * (b - a)
    }
}

/// Records solver steps into a [`FieldOracle`] over a fixed space-time window.
pub struct OracleRecorder {
    x_lo: f64,
    x_hi: f64,
    t_lo: f64,
    t_hi: f64,
    oracle: Option<FieldOracle>,
    offset: usize,
}

impl OracleRecorder {
    pub fn new(x_lo: f64, x_hi: f64, t_lo: f64, t_hi: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            t_lo,
            t_hi,
            oracle: None,
            offset: 0,
        }
    }

    pub fn finish(self) -> Option<FieldOracle> {
        self.oracle
    }
}

impl Observer for OracleRecorder {
    fn observe(&mut self, view: &mut StepView<'_>) -> Result<()> {
        let t = view.field.time;
        if t < self.t_lo - TIME_SLACK || t > self.t_hi + TIME_SLACK {
            return Ok(());
        }
        let domain = view.field.domain;
        if self.oracle.is_none() {
            let dx = domain.dx();
            let first = ((self.x_lo - domain.x_lo) / dx - 0.5).floor().max(0.0) as usize;
            let last = (((self.x_hi - domain.x_lo) / dx - 0.5).ceil() as usize).min(domain.n - 1);
            self.offset = first;
            self.oracle = Some(FieldOracle::new(domain.x(first), dx, last + 1 - first)?);
        }
        let interaction = view.interaction();
        let oracle = self.oracle.as_mut().expect("initialised above");
        let range = self.offset..self.offset + oracle.len;
        oracle.push(
            t,
            view.field.values[range.clone()].to_vec(),
            interaction[range].to_vec(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FKConfig {
    pub n_paths: usize,
    pub path_dt: f64,
    /// Look-back time `t'`.
    pub horizon: f64,
    pub seed: u64,
}

impl Default for FKConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            path_dt: 0.01,
            horizon: 5.0,
            seed: 0,
        }
    }
}

impl FKConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                value: self.n_paths as f64,
                reason: "at least 100 paths required".into(),
            });
        }
        ensure_positive("path_dt", self.path_dt)?;
        if self.path_dt > self.horizon {
            return Err(Error::InvalidParameter {
                name: "path_dt",
                value: self.path_dt,
                reason: format!("must not exceed the horizon {}", self.horizon),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FKEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    /// Paths that left the stored spatial range at some point.
    pub out_of_range: usize,
    /// Set when `out_of_range` exceeds the allowed fraction.
    pub flagged: bool,
}

/// Estimate `u(t, x)` with look-back `config.horizon` against the stored snapshots.
pub fn estimate_u(x: f64, t: f64, oracle: &FieldOracle, config: &FKConfig) -> Result<FKEstimate> {
    config.validate()?;
    let horizon = config.horizon;
    if horizon > t + TIME_SLACK {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            reason: format!("look-back exceeds t = {t}"),
        });
    }
    oracle.check_coverage(t - horizon, t)?;
    check_start(x, horizon, oracle)?;
    let terminal_time = t - horizon;
    Ok(simulate(x, t, horizon, oracle, config, |y| {
        oracle.u_at(terminal_time, y)
    }))
}

/// Estimate `u(t, x)` by running paths all the way back to the initial data `u0`.
pub fn estimate_u_from_initial(
    x: f64,
    t: f64,
    u0: impl Fn(f64) -> f64 + Sync,
    oracle: &FieldOracle,
    config: &FKConfig,
) -> Result<FKEstimate> {
    if t == 0.0 {
        return Ok(FKEstimate {
            mean: u0(x),
            standard_error: 0.0,
            n_paths: config.n_paths,
            out_of_range: 0,
            flagged: false,
        });
    }
    ensure_positive("t", t)?;
    let config = FKConfig {
        horizon: t,
        path_dt: config.path_dt.min(t),
        ..*config
    };
    config.validate()?;
    oracle.check_coverage(0.0, t)?;
    check_start(x, t, oracle)?;
    Ok(simulate(x, t, t, oracle, &config, u0))
}

fn check_start(x: f64, horizon: f64, oracle: &FieldOracle) -> Result<()> {
    let margin = START_MARGIN_SIGMAS * horizon.sqrt();
    let (a, b) = oracle.x_range();
    if x < a + margin || x > b - margin {
        return Err(Error::OutOfDomain {
            x,
            x_lo: a + margin,
            x_hi: b - margin,
        });
    }
    Ok(())
}

fn simulate(
    x: f64,
    t: f64,
    horizon: f64,
    oracle: &FieldOracle,
    config: &FKConfig,
    terminal: impl Fn(f64) -> f64 + Sync,
) -> FKEstimate {
    let steps = ((horizon / config.path_dt).round() as usize).max(1);
    let h = horizon / steps as f64;
    let sd = h.sqrt();
    let rate = |s: f64, y: f64| 1.0 - oracle.interaction_at(t - s, y);

    let paths: Vec<(f64, bool)> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_stream(config.seed, p);
            let mut y = x;
            let mut outside = !oracle.in_range(y);
            let mut prev = rate(0.0, y);
            let mut integral = 0.0;
            for k in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                y += sd * z;
                outside |= !oracle.in_range(y);
                let next = rate(k as f64 * h, y);
                integral += 0.5 * h * (prev + next);
                prev = next;
            }
            (integral.exp() * terminal(y), outside)
        })
        .collect();

    let values: Vec<f64> = paths.iter().map(|(v, _)| *v).collect();
    let out_of_range = paths.iter().filter(|(_, o)| *o).count();
    let (mean, standard_error) = mean_and_se(&values);
    FKEstimate {
        mean,
        standard_error,
        n_paths: config.n_paths,
        out_of_range,
        flagged: out_of_range as f64 > OUT_OF_RANGE_LIMIT * config.n_paths as f64,
    }
}

/// `(mean − grid_value) / standard_error`.
pub fn zscore(estimate: &FKEstimate, grid_value: f64) -> Result<f64> {
    if estimate.standard_error > 0.0 {
        Ok((estimate.mean - grid_value) / estimate.standard_error)
    } else if estimate.mean == grid_value {
        Ok(0.0)
    } else {
        Err(Error::ZeroStandardError {
            mean: estimate.mean,
            reference: grid_value,
        })
    }
}

/// One row of a probe-set comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub x: f64,
    pub t: f64,
    pub grid_u: f64,
    pub estimate: FKEstimate,
    pub z: f64,
}

pub fn write_probe_csv(rows: &[ProbeResult], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,t,grid_u,fk_mean,fk_se,z,n_paths,flagged")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.x,
            r.t,
            r.grid_u,
            r.estimate.mean,
            r.estimate.standard_error,
            r.z,
            r.estimate.n_paths,
            r.estimate.flagged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_paths: usize) -> FKConfig {
        FKConfig {
            n_paths,
            path_dt: 0.01,
            horizon: 1.0,
            seed: 11,
        }
    }

    #[test]
    fn unit_field_gives_exactly_one() {
        let o = FieldOracle::constant(-20.0, 0.05, 801, 0.0, 10.0, 1.0).unwrap();
        let e = estimate_u(0.0, 5.0, &o, &config(1000)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(zscore(&e, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_field_gives_zero() {
        let o = FieldOracle::constant(-20.0, 0.05, 801, 0.0, 10.0, 0.0).unwrap();
        let e = estimate_u(0.0, 5.0, &o, &config(1000)).unwrap();
        assert_eq!(e.mean, 0.0);
        let e = estimate_u_from_initial(0.0, 2.0, |_| 0.0, &o, &config(1000)).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn empty_integral_returns_initial_value() {
        let o = FieldOracle::constant(-20.0, 0.05, 801, 0.0, 10.0, 0.3).unwrap();
        let e = estimate_u_from_initial(0.5, 0.0, |y| 2.0 + y, &o, &config(1000)).unwrap();
        assert_eq!(e.mean, 2.5);
    }

    #[test]
    fn coverage_and_margin_errors() {
        let o = FieldOracle::constant(-20.0, 0.05, 801, 4.0, 10.0, 1.0).unwrap();
        assert!(matches!(
            estimate_u(
                0.0,
                8.0,
                &o,
                &FKConfig {
                    horizon: 5.0,
                    ..config(1000)
                }
            ),
            Err(Error::OracleCoverage { .. })
        ));
        assert!(matches!(
            estimate_u(18.0, 8.0, &o, &config(1000)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn zscore_arithmetic() {
        let e = FKEstimate {
            mean: 1.3,
            standard_error: 0.1,
            n_paths: 100,
            out_of_range: 0,
            flagged: false,
        };
        assert!((zscore(&e, 1.0).unwrap() - 3.0).abs() < 1e-12);
        let zero = FKEstimate {
            standard_error: 0.0,
            ..e
        };
        assert!(matches!(
            zscore(&zero, 1.0),
            Err(Error::ZeroStandardError { .. })
        ));
    }

    #[test]
    fn interpolation_is_bilinear() {
        let mut o = FieldOracle::new(0.0, 1.0, 3).unwrap();
        o.push(0.0, vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        o.push(1.0, vec![2.0, 3.0, 4.0], vec![1.0; 3]).unwrap();
        assert!((o.u_at(0.5, 0.5) - 1.5).abs() < 1e-15);
        assert!((o.interaction_at(0.25, 1.7) - 0.25).abs() < 1e-15);
        assert!(o.push(0.5, vec![0.0; 3], vec![0.0; 3]).is_err());
    }
}
