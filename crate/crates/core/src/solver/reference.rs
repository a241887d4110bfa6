use serde::{Deserialize, Serialize};

use super::{dot, Domain, InitialCondition, ScalarField};
use crate::error::{ensure_positive, Error, Result};
use crate::kernels::SampledKernel;

pub const REFERENCE_MAX_CELLS: usize = 4096;
pub const REFERENCE_MAX_TIME: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// Upper bound on the time step; the actual step divides `t_final` evenly.
    pub dt_ref: f64,
    pub t_final: f64,
}

impl ReferenceConfig {
    /// The largest admissible step, `dx²/4`.
    pub fn for_domain(domain: &Domain, t_final: f64) -> Self {
        let dx = domain.dx();
        Self {
            dt_ref: 0.25 * dx * dx,
            t_final,
        }
    }
}

/// Forward Euler with the 3-point Laplacian and a direct-summation convolution, using
/// the same boundary policy as the split-step solver. Slow, simple, independent.
pub fn reference_solve(
    config: &ReferenceConfig,
    kernel: &SampledKernel,
    domain: Domain,
    u0: &InitialCondition,
) -> Result<ScalarField> {
    ensure_positive("dt_ref", config.dt_ref)?;
    if domain.n > REFERENCE_MAX_CELLS {
        return Err(Error::ReferenceTooLarge(format!(
            "{} cells (limit {REFERENCE_MAX_CELLS})",
            domain.n
        )));
    }
    if !(config.t_final >= 0.0) || config.t_final > REFERENCE_MAX_TIME {
        return Err(Error::ReferenceTooLarge(format!(
            "t_final = {} (limit {REFERENCE_MAX_TIME})",
            config.t_final
        )));
    }
    let dx = domain.dx();
    let limit = 0.25 * dx * dx;
    if config.dt_ref > limit * (1.0 + 1e-12) {
        return Err(Error::ReferenceUnstable {
            dt_ref: config.dt_ref,
            limit,
        });
    }
    if (kernel.dx - dx).abs() > 1e-9 * dx {
        return Err(Error::GridMismatch {
            kernel_dx: kernel.dx,
            field_dx: dx,
        });
    }

    let mut u = u0.sample(domain)?.values;
    let n = u.len();
    let steps = (config.t_final / config.dt_ref).ceil() as usize;
    let dt = if steps == 0 {
        0.0
    } else {
        config.t_final / steps as f64
    };
    let r = kernel.half_width_cells;
    let w: Vec<f64> = kernel.values.iter().map(|v| v * kernel.dx).collect();
    let mut ext = vec![0.0; n + 2 * r + 2];
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        // Ghost cells: edge value on the left, zero on the right.
        ext[..r + 1].fill(u[0]);
        ext[r + 1..r + 1 + n].copy_from_slice(&u);
        ext[r + 1 + n..].fill(0.0);
        for (i, out) in next.iter_mut().enumerate() {
            let j = i + r + 1;
            // φ is symmetric, so the sum runs over a contiguous window.
            let c = dot(&ext[j - r..=j + r], &w);
            let ui = ext[j];
            let lap = (ext[j - 1] - 2.0 * ui + ext[j + 1]) / (dx * dx);
            *out = ui + dt * (0.5 * lap + ui * (1.0 - c));
        }
        std::mem::swap(&mut u, &mut next);
    }
    ScalarField::new(domain, u, config.t_final)
}
