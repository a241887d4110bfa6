//! Front-trace CSV files.
//!
//! ```text
//! # config_hash=<hex> seed=<n>
//! t,X_level_0.5,X_level_0.1,max_u,probe_lemma25
//! ```
//!
//! Missing values (no crossing, probe not yet defined) are written as `NaN`.

use std::io::Write;
use std::path::Path;

use fkpp_core::front::FrontTrace;
use fkpp_core::solver::TraceRow;

use crate::error::{IoContext, LabError, Result};

pub const PROBE_COLUMN: &str = "probe_lemma25";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub levels: Vec<f64>,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    pub fn front(&self, level_index: usize) -> Result<FrontTrace> {
        let level = self.levels[level_index];
        let samples = self.rows.iter().map(|r| (r.t, r.fronts[level_index]));
        Ok(FrontTrace::from_partial(level, samples)?)
    }

    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|l| (l - level).abs() < 1e-12)
    }
}

pub fn level_column(level: f64) -> String {
    format!("X_level_{level}")
}

/// `# config_hash=... seed=...` line opening every emitted text file.
pub fn provenance_line(config_hash: &str, seed: u64) -> String {
    format!("# config_hash={config_hash} seed={seed}")
}

pub fn write_trace(
    mut w: impl Write,
    config_hash: &str,
    seed: u64,
    levels: &[f64],
    rows: &[TraceRow],
) -> std::io::Result<()> {
    writeln!(w, "{}", provenance_line(config_hash, seed))?;
    let mut header = vec!["t".to_string()];
    header.extend(levels.iter().map(|l| level_column(*l)));
    header.push("max_u".into());
    header.push(PROBE_COLUMN.into());
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        write!(w, "{}", r.t)?;
        for x in &r.fronts {
            write!(w, ",{x}")?;
        }
        writeln!(w, ",{},{}", r.max_u, r.probe)?;
    }
    Ok(())
}

/// Parse `key=value` pairs from a provenance comment line.
pub fn parse_provenance(line: &str) -> (Option<String>, Option<u64>) {
    let mut hash = None;
    let mut seed = None;
    for part in line.trim_start_matches('#').split_whitespace() {
        match part.split_once('=') {
            Some(("config_hash", v)) => hash = Some(v.to_string()),
            Some(("seed", v)) => seed = v.parse().ok(),
            _ => {}
        }
    }
    (hash, seed)
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let text = std::fs::read_to_string(path).at(path)?;
    let malformed = |reason: String| LabError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let (config_hash, seed) = text
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .map(parse_provenance)
        .unwrap_or((None, None));

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let t_col = col("t").ok_or_else(|| malformed("no `t` column".into()))?;
    let max_col = col("max_u");
    let probe_col = col(PROBE_COLUMN);
    let level_cols: Vec<(usize, f64)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix("X_level_")
                .and_then(|l| l.parse().ok())
                .map(|l| (i, l))
        })
        .collect();
    if level_cols.is_empty() {
        return Err(malformed("no X_level_* columns".into()));
    }

    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let get = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| malformed(format!("row {}: bad number in column {i}", k + 1)))
        };
        rows.push(TraceRow {
            t: get(t_col)?,
            fronts: level_cols
                .iter()
                .map(|(i, _)| get(*i))
                .collect::<Result<_>>()?,
            max_u: max_col.map(get).transpose()?.unwrap_or(f64::NAN),
            probe: probe_col.map(get).transpose()?.unwrap_or(f64::NAN),
        });
    }
    Ok(TraceFile {
        config_hash,
        seed,
        levels: level_cols.iter().map(|(_, l)| *l).collect(),
        rows,
    })
}
