//! Interaction kernels φ: analytic descriptors, grid sampling and tail audits.
//!
//! Every kernel is symmetric, non-negative and of unit mass. Each variant is
//! bounded below by a positive constant `η` on a core `(−σ, σ)`, which is what the
//! well-posedness and boundedness arguments for the equation require.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Fraction of the total mass a truncated kernel may discard.
pub const MAX_DISCARDED_MASS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `φ = 1/(2σ_u)` on `[−σ_u, σ_u]`.
    Uniform { half_width: f64 },
    /// Flat core of height `h` on `[−σ₀, σ₀]`, continued by `h σ₀^{1+α} |x|^{−(1+α)}`.
    PowerTail { alpha: f64, core_half_width: f64 },
    /// Gaussian profile of scale `s`, cut to zero beyond `cutoff`.
    TruncGaussian { scale: f64, cutoff: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Uniform { half_width } => ensure_positive("half_width", half_width),
            KernelSpec::PowerTail {
                alpha,
                core_half_width,
            } => {
                ensure_positive("alpha", alpha)?;
                ensure_positive("core_half_width", core_half_width)
            }
            KernelSpec::TruncGaussian { scale, cutoff } => {
                ensure_positive("scale", scale)?;
                ensure_positive("cutoff", cutoff)
            }
        }
    }

    /// Half-width `σ` of the core on which `φ ≥ η`.
    pub fn core_half_width(&self) -> f64 {
        match *self {
            KernelSpec::Uniform { half_width } => half_width,
            KernelSpec::PowerTail {
                core_half_width, ..
            } => core_half_width,
            KernelSpec::TruncGaussian { scale, cutoff } => scale.min(cutoff),
        }
    }

    /// Radius beyond which φ vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            KernelSpec::Uniform { half_width } => Some(half_width),
            KernelSpec::PowerTail { .. } => None,
            KernelSpec::TruncGaussian { cutoff, .. } => Some(cutoff),
        }
    }

    /// Peak value `φ(0)`.
    pub fn core_height(&self) -> f64 {
        match *self {
            KernelSpec::Uniform { half_width } => 0.5 / half_width,
            KernelSpec::PowerTail {
                alpha,
                core_half_width,
            } => alpha / (2.0 * core_half_width * (1.0 + alpha)),
            KernelSpec::TruncGaussian { scale, cutoff } => 1.0 / gaussian_mass(scale, cutoff),
        }
    }

    /// Analytic density. At the jump of the uniform kernel the midpoint value is returned.
    pub fn density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            KernelSpec::Uniform { half_width } => {
                let h = 0.5 / half_width;
                let rel = (ax - half_width) / half_width;
                if rel.abs() <= 1e-9 {
                    0.5 * h
                } else if ax < half_width {
                    h
                } else {
                    0.0
                }
            }
            KernelSpec::PowerTail {
                alpha,
                core_half_width,
            } => {
                let h = self.core_height();
                if ax <= core_half_width {
                    h
                } else {
                    h * (core_half_width / ax).powf(1.0 + alpha)
                }
            }
            KernelSpec::TruncGaussian { scale, cutoff } => {
                if ax > cutoff {
                    0.0
                } else {
                    (-0.5 * (ax / scale).powi(2)).exp() / gaussian_mass(scale, cutoff)
                }
            }
        }
    }

    /// One-sided tail mass `∫_r^∞ φ(x) dx`. Negative `r` uses the symmetry of φ.
    pub fn tail_mass(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 1.0 - self.tail_mass(-r);
        }
        match *self {
            KernelSpec::Uniform { half_width } => {
                if r >= half_width {
                    0.0
                } else {
                    0.5 * (half_width - r) / half_width
                }
            }
            KernelSpec::PowerTail {
                alpha,
                core_half_width,
            } => {
                let h = self.core_height();
                let beyond_core = h * core_half_width / alpha;
                if r >= core_half_width {
                    beyond_core * (core_half_width / r).powf(alpha)
                } else {
                    h * (core_half_width - r) + beyond_core
                }
            }
            KernelSpec::TruncGaussian { scale, cutoff } => {
                if r >= cutoff {
                    return 0.0;
                }
                let z = scale * std::f64::consts::SQRT_2;
                let partial = scale
                    * (0.5 * std::f64::consts::PI).sqrt()
                    * (libm::erf(cutoff / z) - libm::erf(r / z));
                partial / gaussian_mass(scale, cutoff)
            }
        }
    }

    /// Mass `∫_r^{Kr} φ(x) dx` of the window `[r, Kr]`.
    pub fn window_mass(&self, r: f64, factor: f64) -> f64 {
        (self.tail_mass(r) - self.tail_mass(factor * r)).max(0.0)
    }
}

fn gaussian_mass(scale: f64, cutoff: f64) -> f64 {
    scale
        * (2.0 * std::f64::consts::PI).sqrt()
        * libm::erf(cutoff / (scale * std::f64::consts::SQRT_2))
}

/// A kernel sampled on the offsets `{−N dx, …, N dx}` and renormalized to unit discrete mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    pub spec: KernelSpec,
    pub dx: f64,
    pub half_width_cells: usize,
    /// `values[N + k]` is the weight at offset `k dx`.
    pub values: Vec<f64>,
    pub discrete_mass: f64,
    /// Analytic two-sided mass beyond the truncation radius.
    pub discarded_mass: f64,
}

impl SampledKernel {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weight at offset `k` cells; zero outside the truncation radius.
    pub fn at(&self, k: isize) -> f64 {
        let n = self.half_width_cells as isize;
        if k.abs() > n {
            0.0
        } else {
            self.values[(k + n) as usize]
        }
    }

    pub fn center_value(&self) -> f64 {
        self.values[self.half_width_cells]
    }

    pub fn radius(&self) -> f64 {
        self.half_width_cells as f64 * self.dx
    }

    /// Two-column CSV `x,phi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,phi")?;
        let n = self.half_width_cells as isize;
        for (i, v) in self.values.iter().enumerate() {
            let x = (i as isize - n) as f64 * self.dx;
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }
}

/// Sample `spec` at the grid offsets within `truncation_radius` and renormalize so that
/// `Σ values · dx = 1`.
pub fn build_kernel(spec: KernelSpec, dx: f64, truncation_radius: f64) -> Result<SampledKernel> {
    spec.validate()?;
    ensure_positive("dx", dx)?;
    ensure_positive("truncation_radius", truncation_radius)?;
    let core = spec.core_half_width();
    if dx >= core {
        return Err(Error::InvalidParameter {
            name: "dx",
            value: dx,
            reason: format!("must resolve the kernel core half-width {core}"),
        });
    }
    if truncation_radius < core {
        return Err(Error::InvalidParameter {
            name: "truncation_radius",
            value: truncation_radius,
            reason: format!("must cover the kernel core half-width {core}"),
        });
    }

    let mut cells = (truncation_radius / dx + 1e-9).floor() as usize;
    if let Some(support) = spec.support_radius() {
        cells = cells.min((support / dx + 1e-9).floor() as usize);
    }
    let discarded = 2.0 * spec.tail_mass(truncation_radius);
    if discarded >= MAX_DISCARDED_MASS {
        return Err(Error::TruncationTooAggressive {
            radius: truncation_radius,
            discarded,
            limit: MAX_DISCARDED_MASS,
        });
    }

    let half: Vec<f64> = (0..=cells).map(|k| spec.density(k as f64 * dx)).collect();
    let raw_mass = dx * (half[0] + 2.0 * half[1..].iter().sum::<f64>());
    let scale = 1.0 / raw_mass;

    let mut values = Vec::with_capacity(2 * cells + 1);
    values.extend(half[1..].iter().rev().map(|v| v * scale));
    values.extend(half.iter().map(|v| v * scale));
    let discrete_mass = dx * values.iter().sum::<f64>();

    Ok(SampledKernel {
        spec,
        dx,
        half_width_cells: cells,
        values,
        discrete_mass,
        discarded_mass: discarded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub r: f64,
    pub tail: f64,
    pub window: f64,
    /// `tail · r^α`
    pub upper_ratio: f64,
    /// `window · r^α`
    pub lower_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelAudit {
    pub alpha_claim: f64,
    pub window_factor: f64,
    pub rows: Vec<AuditRow>,
    /// Fitted `c` in `∫_r^∞ φ ≤ c r^{−α}`.
    pub upper_constant: f64,
    pub upper_holds: bool,
    /// Fitted `c′` in `∫_r^{Kr} φ ≥ c′ r^{−α}`.
    pub lower_constant: f64,
    pub lower_holds: bool,
    /// Smallest sampled value of φ on the open core `(−σ, σ)`.
    pub eta: f64,
    pub sigma: f64,
    pub core_holds: bool,
}

const AUDIT_POINTS: usize = 60;
const AUDIT_CALIBRATION: usize = 20;
const AUDIT_DECADES: f64 = 4.0;
const AUDIT_SLACK: f64 = 1e-9;

/// Check the tail hypotheses `∫_r^∞ φ ≤ c r^{−α}` and `∫_r^{Kr} φ ≥ c′ r^{−α}` on a
/// log-spaced grid of `r` from `2σ` over four decades.
///
/// The constants are fitted on the first third of the grid and must then hold on the
/// whole grid; a ratio that keeps growing (or decaying to zero) fails.
pub fn audit_conditions(
    spec: KernelSpec,
    alpha_claim: f64,
    window_factor: f64,
) -> Result<KernelAudit> {
    spec.validate()?;
    ensure_positive("alpha_claim", alpha_claim)?;
    if window_factor <= 1.0 || !window_factor.is_finite() {
        return Err(Error::InvalidParameter {
            name: "window_factor",
            value: window_factor,
            reason: "must exceed 1".into(),
        });
    }
    let sigma = spec.core_half_width();
    let r0 = 2.0 * sigma;
    let rows: Vec<AuditRow> = (0..AUDIT_POINTS)
        .map(|i| {
            let r = r0 * 10f64.powf(AUDIT_DECADES * i as f64 / (AUDIT_POINTS - 1) as f64);
            let tail = spec.tail_mass(r);
            let window = spec.window_mass(r, window_factor);
            let weight = r.powf(alpha_claim);
            AuditRow {
                r,
                tail,
                window,
                upper_ratio: tail * weight,
                lower_ratio: window * weight,
            }
        })
        .collect();

    let calibration = &rows[..AUDIT_CALIBRATION];
    let upper_constant = calibration
        .iter()
        .map(|row| row.upper_ratio)
        .fold(0.0, f64::max);
    let lower_constant = calibration
        .iter()
        .map(|row| row.lower_ratio)
        .fold(f64::INFINITY, f64::min);
    let upper_holds = rows
        .iter()
        .all(|row| row.upper_ratio <= upper_constant * (1.0 + AUDIT_SLACK));
    let lower_holds = lower_constant > 0.0
        && rows
            .iter()
            .all(|row| row.lower_ratio >= lower_constant * (1.0 - AUDIT_SLACK));

    let eta = (1..1000)
        .map(|i| spec.density(sigma * (2.0 * i as f64 / 1000.0 - 1.0)))
        .fold(f64::INFINITY, f64::min);

    Ok(KernelAudit {
        alpha_claim,
        window_factor,
        rows,
        upper_constant,
        upper_holds,
        lower_constant,
        lower_holds,
        eta,
        sigma,
        core_holds: eta > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIFORM_HALF: KernelSpec = KernelSpec::Uniform { half_width: 0.5 };
    const POWER_ONE: KernelSpec = KernelSpec::PowerTail {
        alpha: 1.0,
        core_half_width: 1.0,
    };

    /// Scalar-loop oracle for the normalized sample at offset `k`.
    fn oracle_normalized(spec: KernelSpec, dx: f64, cells: usize, k: i64) -> f64 {
        let mut total = 0.0;
        for j in -(cells as i64)..=(cells as i64) {
            total += spec.density(j as f64 * dx);
        }
        spec.density(k as f64 * dx) / (total * dx)
    }

    #[test]
    fn uniform_kernel_has_unit_interior_values() {
        let k = build_kernel(UNIFORM_HALF, 0.1, 1.0).unwrap();
        assert_eq!(k.len(), 11);
        assert!((k.discrete_mass - 1.0).abs() < 1e-12);
        for v in &k.values[1..10] {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
        assert!((k.values[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_tail_normalizes_against_loop_oracle() {
        let k = build_kernel(POWER_ONE, 0.05, 200.0).unwrap();
        assert_eq!(k.half_width_cells, 4000);
        assert!((k.discrete_mass - 1.0).abs() < 1e-12);
        let expected = oracle_normalized(POWER_ONE, 0.05, 4000, 0);
        assert!((k.center_value() - expected).abs() < 1e-13);
        let expected = oracle_normalized(POWER_ONE, 0.05, 4000, 1234);
        assert!((k.at(1234) - expected).abs() < 1e-15);
        assert!((k.at(-1234) - expected).abs() < 1e-15);
    }

    #[test]
    fn aggressive_truncation_is_rejected() {
        match build_kernel(POWER_ONE, 0.05, 2.0) {
            Err(Error::TruncationTooAggressive { discarded, .. }) => {
                // 2 · (C/α) r^{−α} with C = 1/4, α = 1, r = 2.
                assert!((discarded - 0.25).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_grid_spacing() {
        assert!(build_kernel(UNIFORM_HALF, 0.0, 1.0).is_err());
        assert!(build_kernel(UNIFORM_HALF, -0.1, 1.0).is_err());
        assert!(build_kernel(UNIFORM_HALF, 0.6, 1.0).is_err());
    }

    #[test]
    fn tail_mass_values() {
        assert_eq!(UNIFORM_HALF.tail_mass(0.5), 0.0);
        assert!((UNIFORM_HALF.tail_mass(0.0) - 0.5).abs() < 1e-15);
        // C = h σ₀² = 1/4; ∫_10^∞ C x^{-2} dx = C/10.
        assert!((POWER_ONE.tail_mass(10.0) - 0.025).abs() < 1e-15);
        assert!((POWER_ONE.tail_mass(0.0) - 0.5).abs() < 1e-15);
        let g = KernelSpec::TruncGaussian {
            scale: 1.0,
            cutoff: 4.0,
        };
        assert!((g.tail_mass(0.0) - 0.5).abs() < 1e-14);
        assert_eq!(g.tail_mass(4.0), 0.0);
    }

    #[test]
    fn power_tail_log_slope_is_minus_alpha() {
        for alpha in [0.5, 2.0 / 3.0, 1.0, 3.0] {
            let spec = KernelSpec::PowerTail {
                alpha,
                core_half_width: 1.5,
            };
            for r in [3.0, 10.0, 250.0] {
                let r2 = r * 1.7;
                let slope = (spec.tail_mass(r2).ln() - spec.tail_mass(r).ln()) / (r2.ln() - r.ln());
                assert!(
                    (slope + alpha).abs() < 1e-9,
                    "alpha {alpha} r {r} slope {slope}"
                );
            }
        }
    }

    #[test]
    fn audit_uniform_kernel() {
        let a = audit_conditions(UNIFORM_HALF, 3.0, 2.0).unwrap();
        assert!(a.upper_holds);
        assert!(!a.lower_holds);
        assert!(a.core_holds);
        assert!((a.eta - 1.0).abs() < 1e-12);
        assert_eq!(a.sigma, 0.5);
    }

    #[test]
    fn audit_power_tail_matching_exponent() {
        let a = audit_conditions(POWER_ONE, 1.0, 2.0).unwrap();
        assert!(a.upper_holds && a.lower_holds);
        // ∫_r^{2r} C x^{-2} dx = C/(2r) with C = 1/4.
        assert!((a.lower_constant - 0.125).abs() < 1e-12);
        assert!((a.upper_constant - 0.25).abs() < 1e-12);
    }

    #[test]
    fn audit_power_tail_overclaimed_exponent() {
        let a = audit_conditions(POWER_ONE, 3.0, 2.0).unwrap();
        assert!(!a.upper_holds);
    }

    #[test]
    fn csv_export_has_one_row_per_cell() {
        let k = build_kernel(UNIFORM_HALF, 0.1, 1.0).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with("x,phi\n-0.5,0.5"));
    }
}
