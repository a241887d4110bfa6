//! Numerical laboratory for the non-local Fisher-KPP equation
//!
//! ```text
//! ∂u/∂t = ½ ∂²u/∂x² + u (1 − φ ∗ u)
//! ```
//!
//! The crate is split along the lines of the experiment pipeline:
//!
//! * [`kernels`]: interaction kernels φ, their grid sampling and tail audits.
//! * [`solver`]: the split-step PDE integrator, an explicit reference scheme and snapshot I/O.
//! * [`front`]: front extraction, delay series and log/power delay fits.
//! * [`feynman_kac`]: Monte Carlo evaluation of the Feynman-Kac representation of `u`.
//! * [`bridge`]: Brownian bridge and tube probabilities, exact and simulated.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod error;
pub mod feynman_kac;
pub mod front;
pub mod kernels;
pub mod rng;
pub mod solver;
mod stats;

pub use error::{Error, Result};
