use super::stepper::Stepper;
use super::{Domain, InitialCondition, ScalarField, SolverConfig};
use crate::error::{Error, Result};
use crate::front::{ahead_of_front_probe, front_location};
use crate::kernels::SampledKernel;

/// Read access to the state after a step, handed to each [`Observer`].
pub struct StepView<'a> {
    pub field: &'a ScalarField,
    pub step: usize,
    stepper: &'a mut Stepper,
}

impl StepView<'_> {
    /// `φ ∗ u` for the current field (computed on demand).
    pub fn interaction(&mut self) -> Vec<f64> {
        self.stepper.interaction(self.field)
    }
}

pub trait Observer {
    /// Called once with the initial field and then after every step.
    fn observe(&mut self, view: &mut StepView<'_>) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Front location per configured level; NaN when there is no crossing.
    pub fronts: Vec<f64>,
    /// Largest value of `u` over all steps since the previous row.
    pub max_u: f64,
    /// `t · u(t, √2 t + ln t / (2√2))`, NaN before the probe is defined.
    pub probe: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub levels: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub snapshots: Vec<ScalarField>,
    pub final_field: ScalarField,
    /// Running maximum of `u` over the whole run.
    pub max_u: f64,
    pub max_clamped: f64,
    pub steps: usize,
    /// Set when the run stopped early because the front reached the right guard band.
    pub aborted: Option<String>,
}

/// Integrate from `u0` up to `config.t_final`, recording the front trace, snapshots, and
/// feeding every observer after each step.
pub fn run(
    config: &SolverConfig,
    kernel: &SampledKernel,
    domain: Domain,
    u0: &InitialCondition,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutput> {
    config.validate()?;
    let mut stepper = Stepper::new(
        kernel,
        domain,
        config.dt,
        config.diffusion,
        config.clamp_negative,
    )?;
    let mut field = u0.sample(domain)?;
    let bound = u0.bound_constant(domain);
    let probe_from = (bound / (std::f64::consts::SQRT_2 - 1.0)).max(1.0);

    let steps = config.steps();
    let sample_every = ((config.sample_interval / config.dt).round() as usize).max(1);
    let mut snapshot_steps: Vec<usize> = config
        .snapshot_times
        .iter()
        .map(|t| ((t / config.dt).round() as usize).min(steps))
        .collect();
    snapshot_steps.dedup();
    let mut next_snapshot = 0;

    let mut out = RunOutput {
        levels: config.levels.clone(),
        trace: Vec::new(),
        snapshots: Vec::new(),
        final_field: field.clone(),
        max_u: field.max(),
        max_clamped: 0.0,
        steps: 0,
        aborted: None,
    };
    let mut interval_max = field.max();

    for k in 0..=steps {
        if k > 0 {
            let stats = stepper.step(&mut field)?;
            field.time = k as f64 * config.dt;
            interval_max = interval_max.max(stats.max);
            out.max_u = out.max_u.max(stats.max);
            out.max_clamped = out.max_clamped.max(stats.clamped);
            out.steps = k;
        }
        for obs in observers.iter_mut() {
            let mut view = StepView {
                field: &field,
                step: k,
                stepper: &mut stepper,
            };
            obs.observe(&mut view)?;
        }
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] == k {
            out.snapshots.push(field.clone());
            next_snapshot += 1;
        }
        if k % sample_every == 0 || k == steps {
            let row = sample_row(&field, &config.levels, interval_max, probe_from);
            interval_max = 0.0;
            if let Some(reason) = exhaustion(&field, &row, config) {
                out.trace.push(row);
                out.aborted = Some(reason);
                break;
            }
            out.trace.push(row);
        }
    }
    out.final_field = field;
    Ok(out)
}

fn sample_row(field: &ScalarField, levels: &[f64], max_u: f64, probe_from: f64) -> TraceRow {
    let fronts = levels
        .iter()
        .map(|l| front_location(field, *l).unwrap_or(f64::NAN))
        .collect();
    let probe = if field.time >= probe_from {
        ahead_of_front_probe(field).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    TraceRow {
        t: field.time,
        fronts,
        max_u,
        probe,
    }
}

fn exhaustion(field: &ScalarField, row: &TraceRow, config: &SolverConfig) -> Option<String> {
    let x_hi = field.domain.x_hi;
    let limit = x_hi - config.exhaustion_guard;
    let lowest = config
        .levels
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let front = row.fronts[lowest.0];
    let last = *field.values.last().unwrap_or(&0.0);
    if front > limit || (front.is_nan() && last >= *lowest.1) {
        let err = Error::DomainExhausted {
            front,
            x_hi,
            time: field.time,
        };
        Some(err.to_string())
    } else {
        None
    }
}
