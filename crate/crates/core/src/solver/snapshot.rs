//! Snapshot files.
//!
//! The binary format is a sequence of records, each laid out little-endian as
//!
//! ```text
//! offset  size  field
//!      0     8  magic "FKPPSNP1"
//!      8     8  n      (u64, cell count)
//!     16     8  dx     (f64)
//!     24     8  x_lo   (f64)
//!     32     8  t      (f64)
//!     40   8·n  values (f64, cell centers left to right)
//! ```

use std::io::{self, Read, Write};

use super::{Domain, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FKPPSNP1";
pub const HEADER_BYTES: usize = 40;

pub fn write_binary(field: &ScalarField, mut w: impl Write) -> io::Result<()> {
    let d = field.domain;
    w.write_all(MAGIC)?;
    w.write_all(&(d.n as u64).to_le_bytes())?;
    w.write_all(&d.dx().to_le_bytes())?;
    w.write_all(&d.x_lo.to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * field.values.len());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Read one record; `Ok(None)` at a clean end of input.
pub fn read_binary(mut r: impl Read) -> Result<Option<ScalarField>> {
    let mut header = [0u8; HEADER_BYTES];
    let mut got = 0;
    while got < HEADER_BYTES {
        let k = r.read(&mut header[got..])?;
        if k == 0 {
            break;
        }
        got += k;
    }
    if got == 0 {
        return Ok(None);
    }
    if got < HEADER_BYTES {
        return Err(Error::Format(format!("truncated header ({got} bytes)")));
    }
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| -> [u8; 8] { header[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let n = u64::from_le_bytes(word(1)) as usize;
    let dx = f64::from_le_bytes(word(2));
    let x_lo = f64::from_le_bytes(word(3));
    let time = f64::from_le_bytes(word(4));
    let mut raw = vec![0u8; 8 * n];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated values: {e}")))?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let domain = Domain::new(x_lo, x_lo + n as f64 * dx, n)?;
    ScalarField::new(domain, values, time).map(Some)
}

/// Read every record of a concatenated snapshot file.
pub fn read_all(mut r: impl Read) -> Result<Vec<ScalarField>> {
    let mut out = Vec::new();
    while let Some(f) = read_binary(&mut r)? {
        out.push(f);
    }
    Ok(out)
}

/// Two columns `x,u`.
pub fn write_csv(field: &ScalarField, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "x,u")?;
    for (x, u) in field.domain.xs().zip(&field.values) {
        writeln!(w, "{x},{u}")?;
    }
    Ok(())
}
