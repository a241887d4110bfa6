//! Experiment configuration files (TOML) and the shipped presets.

use std::f64::consts::SQRT_2;
use std::path::Path;

use fkpp_core::front::FitWindow;
use fkpp_core::kernels::{build_kernel, KernelSpec, SampledKernel};
use fkpp_core::solver::{DiffusionScheme, Domain, InitialCondition, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IoContext, LabError, Result};

pub const PRESET_NAMES: [&str; 3] = ["light", "heavy-alpha1", "heavy-alpha2-3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub domain: DomainSection,
    pub numerics: NumericsSection,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fk: Option<FkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectations>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_x_lo")]
    pub x_lo: f64,
    /// Room beyond `√2 T`; `x_hi = √2 T + margin`.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Kernel truncation radius. Defaults to the kernel's support, or the domain length
    /// for kernels with unbounded support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            x_lo: default_x_lo(),
            margin: default_margin(),
            truncation_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub diffusion: DiffusionScheme,
    #[serde(default = "default_true")]
    pub clamp_negative: bool,
    /// Abort once the lowest-level front is this close to `x_hi`. Defaults to ten core
    /// half-widths of the kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustion_guard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            sample_interval: default_sample_interval(),
            levels: default_levels(),
            snapshot_times: Vec::new(),
        }
    }
}

/// Fit windows; unset bounds default to `[T/10, T]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_t_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSection {
    /// Time at which the probes are evaluated.
    pub t: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_path_dt")]
    pub path_dt: f64,
    pub probes: Vec<f64>,
}

impl FkSection {
    /// Spatial range to store around the probes.
    pub fn x_range(&self) -> (f64, f64) {
        let pad = fkpp_core::feynman_kac::START_MARGIN_SIGMAS * self.horizon.sqrt() + 5.0;
        let lo = self.probes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .probes
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo - pad, hi + pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Log,
    Power,
}

/// Thresholds checked by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub regime: Regime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_slope: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_u: Option<f64>,
    /// Largest allowed ratio of the ahead-of-front probe to its value at `probe_t_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_t_min: Option<f64>,
}

fn default_x_lo() -> f64 {
    -20.0
}
fn default_margin() -> f64 {
    60.0
}
fn default_true() -> bool {
    true
}
fn default_sample_interval() -> f64 {
    1.0
}
fn default_levels() -> Vec<f64> {
    vec![0.5, 0.1]
}
fn default_horizon() -> f64 {
    5.0
}
fn default_n_paths() -> usize {
    100_000
}
fn default_path_dt() -> f64 {
    0.01
}
fn default_initial() -> InitialCondition {
    InitialCondition::Indicator {
        a: -20.0,
        b: 0.0,
        amplitude: 1.0,
    }
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "light" => include_str!("../presets/light.toml"),
            "heavy-alpha1" => include_str!("../presets/heavy_alpha1.toml"),
            "heavy-alpha2-3" => include_str!("../presets/heavy_alpha2_3.toml"),
            other => return Err(LabError::UnknownPreset(other.to_string())),
        };
        Self::from_toml(text)
    }

    /// Canonical TOML rendering; the config hash is taken over these bytes.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn domain(&self) -> Result<Domain> {
        let x_hi = SQRT_2 * self.numerics.t_final + self.domain.margin;
        Ok(Domain::with_spacing(
            self.domain.x_lo,
            x_hi,
            self.numerics.dx,
        )?)
    }

    pub fn truncation_radius(&self, domain: &Domain) -> f64 {
        self.domain
            .truncation_radius
            .or(self.kernel.support_radius())
            .unwrap_or(domain.x_hi - domain.x_lo)
    }

    pub fn kernel(&self) -> Result<SampledKernel> {
        let domain = self.domain()?;
        Ok(build_kernel(
            self.kernel,
            self.numerics.dx,
            self.truncation_radius(&domain),
        )?)
    }

    pub fn exhaustion_guard(&self) -> f64 {
        self.numerics
            .exhaustion_guard
            .unwrap_or(10.0 * self.kernel.core_half_width())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.numerics.dt,
            t_final: self.numerics.t_final,
            snapshot_times: self.output.snapshot_times.clone(),
            clamp_negative: self.numerics.clamp_negative,
            diffusion: self.numerics.diffusion,
            sample_interval: self.output.sample_interval,
            levels: self.output.levels.clone(),
            exhaustion_guard: self.exhaustion_guard(),
        }
    }

    pub fn fit_window(&self) -> Result<FitWindow> {
        let t = self.numerics.t_final;
        Ok(FitWindow::new(
            self.fit.t_min.unwrap_or(t / 10.0),
            self.fit.t_max.unwrap_or(t),
        )?)
    }

    pub fn speed_window(&self) -> Result<FitWindow> {
        let fit = self.fit_window()?;
        Ok(FitWindow::new(
            self.fit.speed_t_min.unwrap_or(fit.t_min),
            self.fit.speed_t_max.unwrap_or(fit.t_max),
        )?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(invalid("`name` must not be empty"));
        }
        self.kernel.validate()?;
        self.initial.validate()?;
        self.solver_config().validate()?;
        let n = &self.numerics;
        if !(n.dx > 0.0 && n.dx.is_finite()) {
            return Err(invalid(format!("numerics.dx = {} must be positive", n.dx)));
        }
        if n.dx >= self.kernel.core_half_width() {
            return Err(invalid(format!(
                "numerics.dx = {} must be below the kernel core half-width {}",
                n.dx,
                self.kernel.core_half_width()
            )));
        }
        let guard = self.exhaustion_guard();
        if !(self.domain.margin > guard) {
            return Err(invalid(format!(
                "domain.margin = {} must exceed the exhaustion guard {guard}",
                self.domain.margin
            )));
        }
        if self.output.levels.is_empty() {
            return Err(invalid("output.levels must not be empty"));
        }
        let domain = self.domain()?;
        if let InitialCondition::Custom { values } = &self.initial {
            if values.len() != domain.n {
                return Err(invalid(format!(
                    "custom initial data has {} values, the grid has {} cells",
                    values.len(),
                    domain.n
                )));
            }
        }
        let radius = self.truncation_radius(&domain);
        if radius > domain.x_hi - domain.x_lo + 1e-9 {
            return Err(invalid(format!(
                "kernel truncation radius {radius} exceeds the domain length {}",
                domain.x_hi - domain.x_lo
            )));
        }
        let w = self.fit_window()?;
        let s = self.speed_window()?;
        if w.t_max > n.t_final || s.t_max > n.t_final {
            return Err(invalid("fit windows must end by numerics.t_final"));
        }
        if let Some(fk) = &self.fk {
            if fk.probes.is_empty() {
                return Err(invalid("fk.probes must not be empty"));
            }
            if !(fk.horizon > 0.0 && fk.horizon <= fk.t && fk.t <= n.t_final) {
                return Err(invalid(format!(
                    "fk needs 0 < horizon <= t <= t_final (horizon {}, t {})",
                    fk.horizon, fk.t
                )));
            }
            let (lo, hi) = fk.x_range();
            if lo < domain.x_lo || hi > domain.x_hi {
                return Err(invalid(format!(
                    "fk probes need [{lo}, {hi}] inside the domain [{}, {}]",
                    domain.x_lo, domain.x_hi
                )));
            }
            fkpp_core::feynman_kac::FKConfig {
                n_paths: fk.n_paths,
                path_dt: fk.path_dt,
                horizon: fk.horizon,
                seed: self.seed,
            }
            .validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in PRESET_NAMES {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.numerics.t_final, 3000.0);
            assert_eq!(cfg.output.levels, vec![0.5, 0.1]);
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::preset("light").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        let back = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn large_dt_is_rejected() {
        let text = include_str!("../presets/light.toml").replace("dt = 0.02", "dt = 0.5");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(LabError::Core(fkpp_core::Error::InvalidParameter {
                name: "dt",
                ..
            }))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text =
            include_str!("../presets/light.toml").replace("[numerics]", "[numerics]\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
