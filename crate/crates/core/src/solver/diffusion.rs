use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::convolution::fast_size;
use super::dot;

/// Gaussian weights are kept out to this many standard deviations.
const KERNEL_SIGMAS: f64 = 8.0;

/// How the heat semigroup `e^{τΔ/2}` is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionScheme {
    /// Convolution with the sampled, normalized Gaussian of variance `τ`. All weights are
    /// positive, so exponentially small values ahead of a front keep full relative precision.
    #[default]
    HeatKernel,
    /// Multiply the spectrum of the padded field by `exp(−k²τ/2)`. Round-off leaves an
    /// absolute noise floor near `1e−16 · max u` that the reaction term amplifies.
    Spectral,
}

struct SpectralPlan {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    multiplier: Vec<f64>,
}

/// Exact heat flow with diffusivity ½ over a fixed time `τ`, using the grid's boundary
/// policy (edge value on the left, zero on the right).
pub struct Diffuser {
    scheme: DiffusionScheme,
    dx: f64,
    tau: f64,
    reach: usize,
    gauss: Vec<f64>,
    left_tail: Vec<f64>,
    planner: RealFftPlanner<f64>,
    plan: Option<SpectralPlan>,
    real_buf: Vec<f64>,
    complex_buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Diffuser {
    pub fn new(scheme: DiffusionScheme, dx: f64, tau: f64) -> Self {
        let reach = (KERNEL_SIGMAS * tau.sqrt() / dx).ceil() as usize;
        let raw: Vec<f64> = (-(reach as isize)..=reach as isize)
            .map(|k| {
                let x = k as f64 * dx;
                (-x * x / (2.0 * tau)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let gauss: Vec<f64> = raw.iter().map(|g| g / total).collect();
        let mut left_tail = vec![0.0; reach];
        let mut acc = 0.0;
        for j in (0..reach).rev() {
            acc += gauss[reach + j + 1];
            left_tail[j] = acc;
        }
        Self {
            scheme,
            dx,
            tau,
            reach,
            gauss,
            left_tail,
            planner: RealFftPlanner::new(),
            plan: None,
            real_buf: Vec::new(),
            complex_buf: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Number of cells by which the support of the field can grow per application.
    pub fn reach(&self) -> usize {
        self.reach
    }

    pub fn scheme(&self) -> DiffusionScheme {
        self.scheme
    }

    /// Diffuse the first `active` cells of `u` (zero beyond) into `out[..out.len()]`.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        match self.scheme {
            DiffusionScheme::HeatKernel => self.apply_kernel(u, out),
            DiffusionScheme::Spectral => self.apply_spectral(u, out),
        }
    }

    fn apply_kernel(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        let r = self.reach;
        if m == 0 {
            out.fill(0.0);
            return;
        }
        for (j, o) in out.iter_mut().enumerate() {
            let lo = j.saturating_sub(r);
            let hi = (j + r).min(m - 1);
            *o = if lo > hi {
                0.0
            } else {
                let w = &self.gauss[r + lo - j..=r + hi - j];
                dot(&u[lo..=hi], w)
            };
        }
        let edge = u[0];
        if edge != 0.0 {
            for (o, t) in out.iter_mut().zip(&self.left_tail) {
                *o += edge * t;
            }
        }
    }

    fn apply_spectral(&mut self, u: &[f64], out: &mut [f64]) {
        let m = out.len();
        let pad = self.reach.max(1);
        let needed = fast_size(pad + m + pad);
        if self.plan.as_ref().map(|p| p.len) != Some(needed) {
            let forward = self.planner.plan_fft_forward(needed);
            let inverse = self.planner.plan_fft_inverse(needed);
            let width = needed as f64 * self.dx;
            let multiplier = (0..=needed / 2)
                .map(|j| {
                    let k = 2.0 * std::f64::consts::PI * j as f64 / width;
                    (-0.5 * k * k * self.tau).exp() / needed as f64
                })
                .collect();
            self.plan = Some(SpectralPlan {
                len: needed,
                forward,
                inverse,
                multiplier,
            });
        }
        let plan = self.plan.as_ref().unwrap();
        let edge = u.first().copied().unwrap_or(0.0);
        self.real_buf.clear();
        self.real_buf.resize(pad, edge);
        self.real_buf.extend_from_slice(&u[..u.len().min(m)]);
        self.real_buf.resize(plan.len, 0.0);
        self.complex_buf
            .resize(plan.len / 2 + 1, Complex64::default());
        self.scratch.resize(
            plan.forward
                .get_scratch_len()
                .max(plan.inverse.get_scratch_len()),
            Complex64::default(),
        );
        plan.forward
            .process_with_scratch(&mut self.real_buf, &mut self.complex_buf, &mut self.scratch)
            .expect("forward FFT buffer sizes");
        for (c, g) in self.complex_buf.iter_mut().zip(&plan.multiplier) {
            *c *= g;
        }
        self.complex_buf[0].im = 0.0;
        if plan.len.is_multiple_of(2) {
            self.complex_buf[plan.len / 2].im = 0.0;
        }
        plan.inverse
            .process_with_scratch(&mut self.complex_buf, &mut self.real_buf, &mut self.scratch)
            .expect("inverse FFT buffer sizes");
        out.copy_from_slice(&self.real_buf[pad..pad + m]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(x: f64, var: f64) -> f64 {
        (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    fn bump_check(scheme: DiffusionScheme) -> f64 {
        let dx = 0.05;
        let n = 800;
        let x = |i: usize| -20.0 + (i as f64 + 0.5) * dx;
        let v = 1.0;
        let tau = 0.02;
        let u: Vec<f64> = (0..n).map(|i| gaussian(x(i), v)).collect();
        let mut out = vec![0.0; n];
        Diffuser::new(scheme, dx, tau).apply(&u, &mut out);
        (0..n)
            .map(|i| (out[i] - gaussian(x(i), v + tau)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn heat_kernel_adds_variance() {
        assert!(bump_check(DiffusionScheme::HeatKernel) < 1e-8);
    }

    #[test]
    fn spectral_adds_variance() {
        assert!(bump_check(DiffusionScheme::Spectral) < 1e-8);
    }

    #[test]
    fn heat_kernel_preserves_relative_precision() {
        // An exponential tail e^{-√2 x} is an eigenfunction: e^{τΔ/2} multiplies it by e^{τ}.
        let dx = 0.05;
        let tau = 0.01;
        let n = 20_000;
        let u: Vec<f64> = (0..n)
            .map(|i| (-std::f64::consts::SQRT_2 * i as f64 * dx).exp())
            .collect();
        let mut out = vec![0.0; n];
        let mut d = Diffuser::new(DiffusionScheme::HeatKernel, dx, tau);
        d.apply(&u, &mut out);
        // Far from both edges, deep below 1e-200, the ratio is still accurate.
        for i in [5_000, 9_000] {
            assert!(u[i] < 1e-150);
            let ratio = out[i] / u[i];
            assert!((ratio / tau.exp() - 1.0).abs() < 1e-12, "ratio {ratio}");
        }
    }

    #[test]
    fn left_edge_is_continued() {
        let dx = 0.05;
        let u = vec![1.0; 100];
        let mut out = vec![0.0; 100];
        Diffuser::new(DiffusionScheme::HeatKernel, dx, 0.01).apply(&u, &mut out);
        assert!((out[0] - 1.0).abs() < 1e-14);
        assert!(out[99] < 0.6 && out[99] > 0.4);
    }
}
