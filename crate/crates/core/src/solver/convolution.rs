use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{dot, ScalarField};
use crate::error::{Error, Result};
use crate::kernels::SampledKernel;

/// Kernels up to this many cells are applied by direct summation.
const DIRECT_MAX_CELLS: usize = 129;
/// Active lengths are rounded up to a multiple of this before planning an FFT, so the
/// kernel spectrum is recomputed only when the active region grows past a chunk.
const CHUNK: usize = 4096;

/// Smallest `2^a 3^b 5^c` not below `target`.
pub(crate) fn fast_size(target: usize) -> usize {
    let mut best = usize::MAX;
    let mut p5 = 1usize;
    while p5 < 2 * target.max(1) {
        let mut p35 = p5;
        while p35 < 2 * target.max(1) {
            let mut p = p35;
            while p < target {
                p *= 2;
            }
            best = best.min(p);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

struct Spectrum {
    active: usize,
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    kernel: Vec<Complex64>,
}

/// Applies `φ∗u` with the grid's boundary policy: left of the grid `u` equals its first
/// value, right of the grid it is zero.
pub struct Convolver {
    dx: f64,
    half_width: usize,
    /// `values · dx`
    weights: Vec<f64>,
    /// `left_tail[j] = dx Σ_{k>j} φ_k`, the weight that cell `j` puts on the left extension.
    left_tail: Vec<f64>,
    planner: RealFftPlanner<f64>,
    spectrum: Option<Spectrum>,
    real_buf: Vec<f64>,
    complex_buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Convolver {
    pub fn new(kernel: &SampledKernel) -> Self {
        let dx = kernel.dx;
        let half_width = kernel.half_width_cells;
        let weights: Vec<f64> = kernel.values.iter().map(|v| v * dx).collect();
        let mut left_tail = vec![0.0; half_width];
        let mut acc = 0.0;
        for j in (0..half_width).rev() {
            acc += weights[half_width + j + 1];
            left_tail[j] = acc;
        }
        Self {
            dx,
            half_width,
            weights,
            left_tail,
            planner: RealFftPlanner::new(),
            spectrum: None,
            real_buf: Vec::new(),
            complex_buf: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn uses_fft(&self) -> bool {
        2 * self.half_width + 1 > DIRECT_MAX_CELLS
    }

    /// `out[j] = (φ∗u)(x_j)` for `j < u.len()`, where `u` is the leading part of a grid
    /// field that vanishes beyond `u.len()` cells.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        debug_assert!(out.len() >= m);
        if m == 0 {
            return;
        }
        if self.uses_fft() {
            self.apply_fft(u, &mut out[..m]);
        } else {
            self.apply_direct(u, &mut out[..m]);
        }
        let edge = u[0];
        if edge != 0.0 {
            for (o, t) in out[..m].iter_mut().zip(&self.left_tail) {
                *o += edge * t;
            }
        }
    }

    fn apply_direct(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        let r = self.half_width;
        for (j, o) in out.iter_mut().enumerate() {
            let lo = j.saturating_sub(r);
            let hi = (j + r).min(m - 1);
            // φ is symmetric, so the weight of u[i] is weights[r + i − j].
            let w = &self.weights[r + lo - j..=r + hi - j];
            *o = dot(&u[lo..=hi], w);
        }
    }

    fn apply_fft(&mut self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        let active = (m.div_ceil(CHUNK) * CHUNK).max(m);
        if self.spectrum.as_ref().map(|s| s.active) != Some(active) {
            self.spectrum = Some(self.plan(active));
        }
        let spec = self.spectrum.as_ref().unwrap();
        let len = spec.len;
        self.real_buf.clear();
        self.real_buf.extend_from_slice(u);
        self.real_buf.resize(len, 0.0);
        self.complex_buf.resize(len / 2 + 1, Complex64::default());
        self.scratch.resize(
            spec.forward
                .get_scratch_len()
                .max(spec.inverse.get_scratch_len()),
            Complex64::default(),
        );
        spec.forward
            .process_with_scratch(&mut self.real_buf, &mut self.complex_buf, &mut self.scratch)
            .expect("forward FFT buffer sizes");
        for (c, k) in self.complex_buf.iter_mut().zip(&spec.kernel) {
            *c *= k;
        }
        // The imaginary parts of the DC and Nyquist bins are zero up to rounding.
        self.complex_buf[0].im = 0.0;
        if len.is_multiple_of(2) {
            self.complex_buf[len / 2].im = 0.0;
        }
        spec.inverse
            .process_with_scratch(&mut self.complex_buf, &mut self.real_buf, &mut self.scratch)
            .expect("inverse FFT buffer sizes");
        let norm = 1.0 / len as f64;
        for (o, v) in out.iter_mut().zip(&self.real_buf) {
            *o = v * norm;
        }
    }

    fn plan(&mut self, active: usize) -> Spectrum {
        let reach = self.half_width.min(active - 1);
        let len = fast_size(active + reach);
        let forward = self.planner.plan_fft_forward(len);
        let inverse = self.planner.plan_fft_inverse(len);
        let r = self.half_width;
        let mut buf = vec![0.0; len];
        buf[0] = self.weights[r];
        for k in 1..=reach {
            buf[k] = self.weights[r + k];
            buf[len - k] = self.weights[r - k];
        }
        let mut kernel = vec![Complex64::default(); len / 2 + 1];
        forward
            .process(&mut buf, &mut kernel)
            .expect("kernel FFT buffer sizes");
        Spectrum {
            active,
            len,
            forward,
            inverse,
            kernel,
        }
    }
}

/// `φ∗u` over the whole field.
pub fn convolve(kernel: &SampledKernel, field: &ScalarField) -> Result<ScalarField> {
    check_grid(kernel, field)?;
    let mut out = vec![0.0; field.values.len()];
    Convolver::new(kernel).apply(&field.values, &mut out);
    Ok(ScalarField {
        domain: field.domain,
        values: out,
        time: field.time,
    })
}

pub(crate) fn check_grid(kernel: &SampledKernel, field: &ScalarField) -> Result<()> {
    let field_dx = field.domain.dx();
    if (kernel.dx - field_dx).abs() > 1e-9 * field_dx {
        return Err(Error::GridMismatch {
            kernel_dx: kernel.dx,
            field_dx,
        });
    }
    if kernel.half_width_cells > field.domain.n {
        return Err(Error::KernelTooWide {
            kernel_cells: kernel.half_width_cells,
            domain_cells: field.domain.n,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernels::{build_kernel, KernelSpec};
    use crate::solver::Domain;

    /// Naive double loop over the extended field.
    fn oracle(kernel: &SampledKernel, u: &[f64]) -> Vec<f64> {
        let n = u.len() as isize;
        let r = kernel.half_width_cells as isize;
        (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for k in -r..=r {
                    let i = j - k;
                    let ui = if i < 0 {
                        u[0]
                    } else if i >= n {
                        0.0
                    } else {
                        u[i as usize]
                    };
                    acc += kernel.at(k) * ui;
                }
                acc * kernel.dx
            })
            .collect()
    }

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(1), 1);
        assert_eq!(fast_size(7), 8);
        assert_eq!(fast_size(13), 15);
        assert_eq!(fast_size(4097), 4320);
    }

    #[test]
    fn direct_matches_oracle() {
        let kernel = build_kernel(KernelSpec::Uniform { half_width: 0.2 }, 0.05, 0.2).unwrap();
        assert_eq!(kernel.len(), 9);
        let u = random_field(64, 1);
        let mut out = vec![0.0; 64];
        let mut conv = Convolver::new(&kernel);
        assert!(!conv.uses_fft());
        conv.apply(&u, &mut out);
        for (a, b) in out.iter().zip(oracle(&kernel, &u)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_oracle() {
        let spec = KernelSpec::PowerTail {
            alpha: 1.0,
            core_half_width: 1.0,
        };
        let kernel = build_kernel(spec, 0.05, 60.0).unwrap();
        let u = random_field(3000, 2);
        let mut conv = Convolver::new(&kernel);
        assert!(conv.uses_fft());
        let mut out = vec![0.0; 3000];
        conv.apply(&u, &mut out);
        for (a, b) in out.iter().zip(oracle(&kernel, &u)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // A shorter active prefix reuses the same machinery.
        let mut short = vec![0.0; 700];
        let mut padded = u[..700].to_vec();
        conv.apply(&padded, &mut short);
        padded.resize(3000, 0.0);
        for (a, b) in short.iter().zip(oracle(&kernel, &padded)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_window_at_step_is_one_half() {
        let kernel = build_kernel(KernelSpec::Uniform { half_width: 0.5 }, 0.05, 0.5).unwrap();
        // Cell edges at multiples of dx, the step sits between the two central cells;
        // shift by half a cell so a center lies on x = 0.
        let d = Domain::new(-20.025, 20.025, 801).unwrap();
        let u = ScalarField::from_fn(d, |x| if x <= 1e-12 { 1.0 } else { 0.0 });
        let c = convolve(&kernel, &u).unwrap();
        let i0 = 400;
        assert!(d.x(i0).abs() < 1e-12);
        // The window covers 10 cells at full weight on each side plus half-weight ends,
        // and the center cell itself: 0.5 + weight of the center cell / 2.
        let expected = 0.5 + 0.5 * kernel.center_value() * kernel.dx;
        assert!((c.values[i0] - expected).abs() < 1e-12);
        // Evaluated midway between the two cells straddling the step the value is exactly 1/2.
        let mid = 0.5 * (c.values[i0] + c.values[i0 + 1]);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_preserved_away_from_right_edge() {
        let kernel = build_kernel(KernelSpec::Uniform { half_width: 1.0 }, 0.05, 1.0).unwrap();
        let d = Domain::new(0.0, 50.0, 1000).unwrap();
        let u = ScalarField::from_fn(d, |_| 0.7);
        let c = convolve(&kernel, &u).unwrap();
        for v in &c.values[..1000 - kernel.half_width_cells] {
            assert!((v - 0.7).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let kernel = build_kernel(KernelSpec::Uniform { half_width: 1.0 }, 0.1, 1.0).unwrap();
        let d = Domain::new(0.0, 50.0, 1000).unwrap();
        let u = ScalarField::zeros(d);
        assert!(matches!(
            convolve(&kernel, &u),
            Err(Error::GridMismatch { .. })
        ));
    }
}
