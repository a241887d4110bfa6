use super::convolution::{check_grid, Convolver};
use super::diffusion::{Diffuser, DiffusionScheme};
use super::{Domain, ScalarField, FLUSH_FLOOR};
use crate::error::{ensure_positive, Error, Result};
use crate::kernels::SampledKernel;

/// Largest clamped negative value tolerated per step, relative to `max u`.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// Largest magnitude of a negative value set to zero during the step.
    pub clamped: f64,
    pub max: f64,
    /// Leading cells that may be non-zero after the step.
    pub active: usize,
}

/// One time step is `D(dt/2) ∘ R(dt) ∘ D(dt/2)`: exact heat flow for half a step on
/// either side of a reaction substep.
///
/// The reaction substep solves `u' = u (1 − c)` exactly with `c` frozen, taking
/// `c = φ ∗ u` at the substep midpoint (predicted with `c` frozen at the start). Both
/// halves of the splitting are thus second order and so is the step.
///
/// Only the leading run of possibly non-zero cells is processed; everything to the right
/// of it is exactly zero.
pub struct Stepper {
    domain: Domain,
    dt: f64,
    clamp_negative: bool,
    convolver: Convolver,
    diffuser: Diffuser,
    work: Vec<f64>,
    interaction: Vec<f64>,
    midpoint: Vec<f64>,
}

impl Stepper {
    pub fn new(
        kernel: &SampledKernel,
        domain: Domain,
        dt: f64,
        scheme: DiffusionScheme,
        clamp_negative: bool,
    ) -> Result<Self> {
        ensure_positive("dt", dt)?;
        check_grid(kernel, &ScalarField::zeros(domain))?;
        let n = domain.n;
        Ok(Self {
            domain,
            dt,
            clamp_negative,
            convolver: Convolver::new(kernel),
            diffuser: Diffuser::new(scheme, domain.dx(), 0.5 * dt),
            work: vec![0.0; n],
            interaction: vec![0.0; n],
            midpoint: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `φ ∗ u` over the whole grid.
    pub fn interaction(&mut self, field: &ScalarField) -> Vec<f64> {
        let mut out = vec![0.0; field.values.len()];
        self.convolver.apply(&field.values, &mut out);
        out
    }

    pub fn step(&mut self, field: &mut ScalarField) -> Result<StepStats> {
        if field.domain != self.domain {
            return Err(Error::GridMismatch {
                kernel_dx: self.domain.dx(),
                field_dx: field.domain.dx(),
            });
        }
        let n = self.domain.n;
        let h = self.dt;
        let mut clamped = 0.0f64;

        let m0 = active_len(&field.values);
        let m1 = (m0 + self.diffuser.reach()).min(n);
        self.diffuse(field, m0, m1, &mut clamped);

        let (u, c, mid) = (
            &mut field.values[..m1],
            &mut self.interaction[..m1],
            &mut self.midpoint[..m1],
        );
        self.convolver.apply(u, c);
        for ((p, ui), ci) in mid.iter_mut().zip(u.iter()).zip(c.iter()) {
            *p = ui * ((1.0 - ci) * 0.5 * h).exp();
        }
        self.convolver.apply(mid, c);
        for (ui, ci) in u.iter_mut().zip(c.iter()) {
            *ui *= ((1.0 - ci) * h).exp();
        }

        let m2 = (m1 + self.diffuser.reach()).min(n);
        self.diffuse(field, m1, m2, &mut clamped);

        let mut max = 0.0f64;
        for (i, v) in field.values[..m2].iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BlowUp {
                    time: field.time + h,
                    x: self.domain.x(i),
                });
            }
            max = max.max(*v);
        }
        if self.clamp_negative && clamped > CLAMP_TOLERANCE * max {
            return Err(Error::ExcessiveClamping {
                clamped,
                max,
                time: field.time + h,
            });
        }
        field.time += h;
        Ok(StepStats {
            clamped,
            max,
            active: active_len(&field.values[..m2]),
        })
    }

    fn diffuse(&mut self, field: &mut ScalarField, from: usize, to: usize, clamped: &mut f64) {
        let out = &mut self.work[..to];
        self.diffuser.apply(&field.values[..from], out);
        for v in out.iter_mut() {
            if *v < 0.0 && self.clamp_negative {
                *clamped = clamped.max(-*v);
                *v = 0.0;
            } else if v.abs() < FLUSH_FLOOR {
                *v = 0.0;
            }
        }
        field.values[..to].copy_from_slice(out);
    }
}

/// Index one past the last non-zero value.
pub(crate) fn active_len(values: &[f64]) -> usize {
    values.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1)
}

/// Advance `field` by one step of length `dt` with the default heat-kernel diffusion.
pub fn step(field: &ScalarField, kernel: &SampledKernel, dt: f64) -> Result<ScalarField> {
    let mut stepper = Stepper::new(kernel, field.domain, dt, DiffusionScheme::HeatKernel, true)?;
    let mut next = field.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel, KernelSpec};

    fn uniform_kernel(dx: f64) -> SampledKernel {
        build_kernel(KernelSpec::Uniform { half_width: 1.0 }, dx, 1.0).unwrap()
    }

    fn logistic(c: f64, t: f64) -> f64 {
        c * t.exp() / (1.0 + c * (t.exp() - 1.0))
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let d = Domain::new(-10.0, 10.0, 400).unwrap();
        let k = uniform_kernel(d.dx());
        let u = ScalarField::zeros(d);
        let next = step(&u, &k, 0.05).unwrap();
        assert!(next.values.iter().all(|v| *v == 0.0));
        assert!((next.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn uniform_field_follows_logistic() {
        let d = Domain::new(-20.0, 20.0, 800).unwrap();
        let k = uniform_kernel(d.dx());
        let mut u = ScalarField::from_fn(d, |_| 0.5);
        let dt = 0.01;
        let t_end = 3f64.ln();
        let steps = (t_end / dt).round() as usize;
        let mut stepper = Stepper::new(&k, d, dt, DiffusionScheme::HeatKernel, true).unwrap();
        for _ in 0..steps {
            stepper.step(&mut u).unwrap();
        }
        let expected = logistic(0.5, steps as f64 * dt);
        // Away from the zero continuation on the right.
        for v in &u.values[..400] {
            assert!((v - expected).abs() < 1e-3);
        }
        assert!((logistic(0.5, t_end) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn step_is_translation_equivariant() {
        let d = Domain::new(-20.0, 20.0, 800).unwrap();
        let k = uniform_kernel(d.dx());
        let u = ScalarField::from_fn(d, |x| {
            if x < -5.0 {
                1.0
            } else {
                (-(x + 5.0)).exp() * 0.9
            }
        });
        let shifted = u.shifted(37);
        let a = step(&u, &k, 0.02).unwrap();
        let b = step(&shifted, &k, 0.02).unwrap();
        for i in 60..700 {
            assert!((a.values[i] - b.values[i + 37]).abs() < 1e-14);
        }
    }

    #[test]
    fn positivity_and_front_support() {
        let d = Domain::new(-20.0, 80.0, 2000).unwrap();
        let k = uniform_kernel(d.dx());
        let mut u = ScalarField::from_fn(d, |x| if x <= 0.0 { 1.0 } else { 0.0 });
        let mut stepper = Stepper::new(&k, d, 0.02, DiffusionScheme::HeatKernel, true).unwrap();
        let mut last = StepStats::default();
        for _ in 0..200 {
            last = stepper.step(&mut u).unwrap();
            assert!(u.values.iter().all(|v| *v >= 0.0));
        }
        assert!(last.max > 0.9 && last.max < 1.5);
        assert!(last.active < d.n);
    }
}
