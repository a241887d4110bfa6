//! Experiment harness for the non-local Fisher-KPP laboratory: TOML configs and presets,
//! run directories with seeded, hashed outputs, and the analysis commands behind the
//! `fkpp-lab` binary.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge_cmd;
pub mod config;
pub mod error;
pub mod fk;
pub mod front_cmd;
pub mod report;
pub mod simulate;
pub mod trace;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};

/// Size the global rayon pool. Only the first call in a process has an effect.
pub fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}
