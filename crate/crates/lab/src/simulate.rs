//! `simulate`: run the solver for a config and persist its outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fkpp_core::feynman_kac::{FieldOracle, OracleRecorder};
use fkpp_core::solver::{run, snapshot, Domain, Observer, ScalarField};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{IoContext, LabError, Result};
use crate::trace::{provenance_line, write_trace};

pub const TRACE_FILE: &str = "trace.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.bin";
pub const FINAL_CSV: &str = "final.csv";
pub const KERNEL_CSV: &str = "kernel.csv";
pub const ORACLE_FILE: &str = "fk_oracle.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub start_time: String,
    pub end_time: String,
    pub wall_clock_s: f64,
    pub code_version: String,
    pub steps: usize,
    pub t_reached: f64,
    pub cells: usize,
    pub kernel_cells: usize,
    pub kernel_discarded_mass: f64,
    /// Largest value of `u` seen over the run.
    pub max_u: f64,
    /// Largest negative value clamped in a single step.
    pub max_clamped: f64,
    pub aborted: Option<String>,
    pub files: Vec<String>,
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).at(path)?))
}

/// Run the experiment and write trace, snapshots, kernel, optional Feynman-Kac oracle,
/// the resolved config and a manifest to `out`. If the front reaches the end of the
/// domain, everything computed so far is written and `Aborted` is returned.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out).at(out)?;
    let start = chrono::Utc::now();
    let clock = Instant::now();
    let hash = cfg.hash();

    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let solver = cfg.solver_config();

    let mut recorder = cfg.fk.as_ref().map(|fk| {
        let (lo, hi) = fk.x_range();
        OracleRecorder::new(lo, hi, fk.t - fk.horizon, fk.t)
    });
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if let Some(r) = recorder.as_mut() {
        observers.push(r);
    }
    let result = run(&solver, &kernel, domain, &cfg.initial, &mut observers)?;

    let mut files = Vec::new();
    let mut emit = |name: &str| -> PathBuf {
        files.push(name.to_string());
        out.join(name)
    };

    fs::write(emit(CONFIG_ECHO), cfg.to_toml()).at(out.join(CONFIG_ECHO))?;

    let path = emit(TRACE_FILE);
    let mut w = create(&path)?;
    write_trace(&mut w, &hash, cfg.seed, &result.levels, &result.trace).at(&path)?;
    w.flush().at(&path)?;

    let path = emit(SNAPSHOT_FILE);
    let mut w = create(&path)?;
    for s in &result.snapshots {
        snapshot::write_binary(s, &mut w).at(&path)?;
    }
    w.flush().at(&path)?;

    let path = emit(FINAL_CSV);
    let mut w = create(&path)?;
    writeln!(w, "{}", provenance_line(&hash, cfg.seed)).at(&path)?;
    snapshot::write_csv(&result.final_field, &mut w).at(&path)?;
    w.flush().at(&path)?;

    let path = emit(KERNEL_CSV);
    let mut w = create(&path)?;
    writeln!(w, "{}", provenance_line(&hash, cfg.seed)).at(&path)?;
    kernel.write_csv(&mut w).at(&path)?;
    w.flush().at(&path)?;

    if let Some(oracle) = recorder.and_then(OracleRecorder::finish) {
        let path = emit(ORACLE_FILE);
        write_oracle(&oracle, &path)?;
    }

    files.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: hash,
        seed: cfg.seed,
        start_time: start.to_rfc3339(),
        end_time: chrono::Utc::now().to_rfc3339(),
        wall_clock_s: clock.elapsed().as_secs_f64(),
        code_version: code_version(),
        steps: result.steps,
        t_reached: result.final_field.time,
        cells: domain.n,
        kernel_cells: kernel.len(),
        kernel_discarded_mass: kernel.discarded_mass,
        max_u: result.max_u,
        max_clamped: result.max_clamped,
        aborted: result.aborted.clone(),
        files,
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).at(&path)?;

    match result.aborted {
        Some(reason) => Err(LabError::Aborted {
            dir: out.to_path_buf(),
            reason,
        }),
        None => Ok(manifest),
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).at(&path)?;
    Ok(serde_json::from_str(&text)?)
}

/// The oracle file holds, for each stored time, a snapshot record of `u` followed by one
/// of `φ∗u`, both over the same sub-grid.
pub fn write_oracle(oracle: &FieldOracle, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let dx = oracle.dx();
    let x_lo = oracle.origin() - 0.5 * dx;
    let n = oracle.cells();
    let domain = Domain::new(x_lo, x_lo + n as f64 * dx, n)?;
    for (t, u, c) in oracle.records() {
        for values in [u, c] {
            let field = ScalarField::new(domain, values.to_vec(), t)?;
            snapshot::write_binary(&field, &mut w).at(path)?;
        }
    }
    w.flush().at(path)
}

pub fn read_oracle(path: &Path) -> Result<FieldOracle> {
    let r = BufReader::new(File::open(path).at(path)?);
    let records = snapshot::read_all(r)?;
    let malformed = |reason: &str| LabError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let first = records
        .first()
        .ok_or_else(|| malformed("empty oracle file"))?;
    if records.len() % 2 != 0 {
        return Err(malformed("odd number of records"));
    }
    let d = first.domain;
    let mut oracle = FieldOracle::new(d.x(0), d.dx(), d.n)?;
    for pair in records.chunks_exact(2) {
        let (u, c) = (&pair[0], &pair[1]);
        if u.domain != d || c.domain != d || u.time != c.time {
            return Err(malformed("records disagree on grid or time"));
        }
        oracle.push(u.time, u.values.clone(), c.values.clone())?;
    }
    Ok(oracle)
}
