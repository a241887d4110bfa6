//! `fk-validate`: compare grid values with Feynman-Kac estimates at the configured probes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use fkpp_core::feynman_kac::{
    estimate_u, write_probe_csv, zscore, FKConfig, FieldOracle, ProbeResult,
};

use crate::config::FkSection;
use crate::error::{IoContext, LabError, Result};
use crate::simulate::{read_oracle, ORACLE_FILE};
use crate::trace::provenance_line;

pub const PROBE_FILE: &str = "fk_probes.csv";

/// Largest number of probes allowed outside `|z| ≤ 3`.
pub const MAX_OUTLIERS: usize = 1;

/// Seed for probe `index`; probes use disjoint streams.
pub fn probe_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn evaluate_probes(
    oracle: &FieldOracle,
    fk: &FkSection,
    seed: u64,
) -> Result<Vec<ProbeResult>> {
    fk.probes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let config = FKConfig {
                n_paths: fk.n_paths,
                path_dt: fk.path_dt,
                horizon: fk.horizon,
                seed: probe_seed(seed, i),
            };
            let estimate = estimate_u(x, fk.t, oracle, &config)?;
            let grid_u = oracle.u_at(fk.t, x);
            let z = zscore(&estimate, grid_u)?;
            Ok(ProbeResult {
                x,
                t: fk.t,
                grid_u,
                estimate,
                z,
            })
        })
        .collect()
}

/// Read `fk_oracle.bin` from a run directory, evaluate the probes and write `fk_probes.csv`.
pub fn cmd_fk_validate(
    fk: &FkSection,
    config_hash: &str,
    seed: u64,
    run_dir: &Path,
) -> Result<Vec<ProbeResult>> {
    let path = run_dir.join(ORACLE_FILE);
    if !path.exists() {
        return Err(LabError::MissingArtifacts {
            dir: run_dir.to_path_buf(),
            missing: vec![ORACLE_FILE.to_string()],
        });
    }
    let oracle = read_oracle(&path)?;
    let rows = evaluate_probes(&oracle, fk, seed)?;
    fs::create_dir_all(run_dir).at(run_dir)?;
    let path = run_dir.join(PROBE_FILE);
    let mut w = BufWriter::new(File::create(&path).at(&path)?);
    writeln!(w, "{}", provenance_line(config_hash, seed)).at(&path)?;
    write_probe_csv(&rows, &mut w).at(&path)?;
    w.flush().at(&path)?;
    Ok(rows)
}

pub fn outliers(rows: &[ProbeResult]) -> usize {
    rows.iter().filter(|r| r.z.abs() > 3.0).count()
}
