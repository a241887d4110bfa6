//! Split-step integrator for `∂u/∂t = ½Δu + u(1 − φ∗u)` on a fixed 1-D grid.
//!
//! Outside the grid the field is continued by its left edge value on the left and by
//! zero on the right, which models a saturated wake behind a right-moving front.

mod convolution;
mod diffusion;
mod reference;
mod run;
pub mod snapshot;
mod stepper;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

pub use convolution::{convolve, Convolver};
pub use diffusion::{Diffuser, DiffusionScheme};
pub use reference::{reference_solve, ReferenceConfig};
pub use run::{run, Observer, RunOutput, StepView, TraceRow};
pub use stepper::{step, StepStats, Stepper};

/// Values below this are flushed to zero after every step.
pub const FLUSH_FLOOR: f64 = 1e-300;

/// Uniform grid of `n` cells on `[x_lo, x_hi]`; values live at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

impl Domain {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x_hi",
                value: x_hi,
                reason: format!("must exceed x_lo = {x_lo}"),
            });
        }
        if n < 16 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "at least 16 cells required".into(),
            });
        }
        Ok(Self { x_lo, x_hi, n })
    }

    /// Smallest grid with spacing `dx` starting at `x_lo` that reaches `x_hi_min`.
    pub fn with_spacing(x_lo: f64, x_hi_min: f64, dx: f64) -> Result<Self> {
        ensure_positive("dx", dx)?;
        let n = ((x_hi_min - x_lo) / dx - 1e-9).ceil().max(0.0) as usize;
        Self::new(x_lo, x_lo + n as f64 * dx, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub domain: Domain,
    pub values: Vec<f64>,
    pub time: f64,
}

impl ScalarField {
    pub fn new(domain: Domain, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != domain.n {
            return Err(Error::Format(format!(
                "{} values for a {}-cell domain",
                values.len(),
                domain.n
            )));
        }
        Ok(Self {
            domain,
            values,
            time,
        })
    }

    pub fn zeros(domain: Domain) -> Self {
        Self {
            domain,
            values: vec![0.0; domain.n],
            time: 0.0,
        }
    }

    pub fn from_fn(domain: Domain, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain,
            values: domain.xs().map(f).collect(),
            time: 0.0,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation between cell centers, continued by the edge value on the
    /// left and decaying linearly to zero over the last half cell on the right.
    pub fn interpolate(&self, x: f64) -> f64 {
        interpolate(&self.domain, &self.values, x)
    }

    /// Shift the profile by `k` cells to the right (negative to the left). Cells entering
    /// from the left take the edge value, cells entering from the right are zero.
    pub fn shifted(&self, k: isize) -> Self {
        let n = self.values.len() as isize;
        let edge = self.values[0];
        let values = (0..n)
            .map(|i| {
                let src = i - k;
                if src < 0 {
                    edge
                } else if src >= n {
                    0.0
                } else {
                    self.values[src as usize]
                }
            })
            .collect();
        Self {
            domain: self.domain,
            values,
            time: self.time,
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn interpolate(domain: &Domain, values: &[f64], x: f64) -> f64 {
    let s = (x - domain.x_lo) / domain.dx() - 0.5;
    if s <= 0.0 {
        return values[0];
    }
    let i = s.floor() as usize;
    let w = s - i as f64;
    let left = values.get(i).copied().unwrap_or(0.0);
    let right = values.get(i + 1).copied().unwrap_or(0.0);
    left + w * (right - left)
}

/// Initial data, compactly supported on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u₀ = amplitude` on `[a, b]`.
    Indicator { a: f64, b: f64, amplitude: f64 },
    /// `u₀ = amplitude` on `(−∞, b]`.
    HalfLine { b: f64, amplitude: f64 },
    /// Explicit cell values on the simulation grid.
    Custom { values: Vec<f64> },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Indicator { a, b, amplitude } => {
                ensure_positive("amplitude", *amplitude)?;
                if !(a < b) {
                    return Err(Error::InvalidParameter {
                        name: "b",
                        value: *b,
                        reason: format!("indicator needs a < b (a = {a})"),
                    });
                }
                Ok(())
            }
            InitialCondition::HalfLine { amplitude, .. } => {
                ensure_positive("amplitude", *amplitude)
            }
            InitialCondition::Custom { values } => {
                match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    Some(v) => Err(Error::InvalidParameter {
                        name: "values",
                        value: *v,
                        reason: "initial data must be finite and non-negative".into(),
                    }),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn sample(&self, domain: Domain) -> Result<ScalarField> {
        self.validate()?;
        let field = match self {
            InitialCondition::Indicator { a, b, amplitude } => {
                ScalarField::from_fn(
                    domain,
                    |x| if x >= *a && x <= *b { *amplitude } else { 0.0 },
                )
            }
            InitialCondition::HalfLine { b, amplitude } => {
                ScalarField::from_fn(domain, |x| if x <= *b { *amplitude } else { 0.0 })
            }
            InitialCondition::Custom { values } => ScalarField::new(domain, values.clone(), 0.0)?,
        };
        Ok(field)
    }

    /// A constant `L` with `‖u₀‖∞ ≤ L` and `u₀(x) = 0` for `x ≥ L`.
    pub fn bound_constant(&self, domain: Domain) -> f64 {
        match self {
            InitialCondition::Indicator { b, amplitude, .. }
            | InitialCondition::HalfLine { b, amplitude } => amplitude.max(b + 1e-12),
            InitialCondition::Custom { values } => {
                let sup = values.iter().copied().fold(0.0, f64::max);
                let last = values
                    .iter()
                    .rposition(|v| *v > 0.0)
                    .map(|i| domain.x(i) + domain.dx())
                    .unwrap_or(f64::NEG_INFINITY);
                sup.max(last)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_true")]
    pub clamp_negative: bool,
    #[serde(default)]
    pub diffusion: DiffusionScheme,
    /// Time between trace samples.
    pub sample_interval: f64,
    /// Front levels tracked in the trace; the smallest one drives the exhaustion check.
    pub levels: Vec<f64>,
    /// The run aborts once the front comes within this distance of `x_hi`.
    pub exhaustion_guard: f64,
}

fn default_true() -> bool {
    true
}

pub const MAX_DT: f64 = 0.1;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        if self.dt > MAX_DT {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
                reason: format!("must not exceed {MAX_DT}"),
            });
        }
        ensure_positive("t_final", self.t_final)?;
        ensure_positive("sample_interval", self.sample_interval)?;
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter {
                name: "snapshot_times",
                value: f64::NAN,
                reason: "must be sorted".into(),
            });
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| **t < 0.0 || **t > self.t_final + 1e-9)
        {
            return Err(Error::InvalidParameter {
                name: "snapshot_times",
                value: *t,
                reason: "must lie in [0, t_final]".into(),
            });
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidParameter {
                name: "levels",
                value: *l,
                reason: "front levels must lie in (0, 1)".into(),
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_geometry() {
        let d = Domain::with_spacing(-20.0, 20.0, 0.05).unwrap();
        assert_eq!(d.n, 800);
        assert!((d.dx() - 0.05).abs() < 1e-15);
        assert!((d.x(0) + 19.975).abs() < 1e-12);
        assert!(Domain::new(1.0, 0.0, 100).is_err());
        assert!(Domain::new(0.0, 1.0, 8).is_err());
    }

    #[test]
    fn interpolation_is_linear_between_centers() {
        let d = Domain::new(0.0, 16.0, 16).unwrap();
        let f = ScalarField::from_fn(d, |x| 2.0 * x);
        assert!((f.interpolate(3.0) - 6.0).abs() < 1e-12);
        assert!((f.interpolate(0.1) - 1.0).abs() < 1e-12);
        assert!((f.interpolate(16.0) - 31.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_conditions_are_right_compact() {
        let d = Domain::new(-10.0, 10.0, 200).unwrap();
        let u = InitialCondition::Indicator {
            a: -5.0,
            b: 0.0,
            amplitude: 1.0,
        }
        .sample(d)
        .unwrap();
        assert!(u
            .values
            .iter()
            .zip(d.xs())
            .all(|(v, x)| x <= 0.0 || *v == 0.0));
        assert_eq!(u.max(), 1.0);
        let bad = InitialCondition::Custom {
            values: vec![-1.0; 200],
        };
        assert!(bad.sample(d).is_err());
    }

    #[test]
    fn config_rejects_large_dt() {
        let cfg = SolverConfig {
            dt: 0.5,
            t_final: 1.0,
            snapshot_times: vec![],
            clamp_negative: true,
            diffusion: DiffusionScheme::HeatKernel,
            sample_interval: 0.1,
            levels: vec![0.5],
            exhaustion_guard: 5.0,
        };
        assert!(cfg.validate().is_err());
    }
}
