//! Diagnostics CSV and `QGFIELD1` binary checkpoints.
//!
//! Checkpoint layout (little-endian): magic `QGFIELD1`, `u32` Mx, `u32` My,
//! `f64` Lx, `f64` Ly, then `Mx * My` `f64` coefficients with `m` outer and
//! `n` inner. Writes go to a temporary file in the target directory which is
//! then renamed into place.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{Domain, SpectralField};
use crate::stepper::DiagnosticsRecord;

pub const DIAGNOSTICS_HEADER: &str = "t,enstrophy,energy,forcing_norm2,envelope";
pub const FIELD_MAGIC: &[u8; 8] = b"QGFIELD1";
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_diagnostics(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(32 + records.len() * 100);
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&fmt17(r.t));
        out.push(',');
        out.push_str(&fmt17(r.enstrophy));
        out.push(',');
        out.push_str(&fmt17(r.energy));
        out.push(',');
        out.push_str(&fmt17(r.forcing_norm2));
        out.push(',');
        if let Some(e) = r.envelope {
            out.push_str(&fmt17(e));
        }
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_diagnostics(records).as_bytes())
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == DIAGNOSTICS_HEADER => {}
        Some(h) => {
            return Err(Error::Format(format!(
                "unexpected diagnostics header {h:?}"
            )));
        }
        None => return Err(Error::Format("empty diagnostics file".to_string())),
    }
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = k + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Format(format!(
                "row {row}: expected 5 columns, found {}",
                cols.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i].trim().parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "row {row}: bad number {:?} in column {}",
                    cols[i],
                    i + 1
                ))
            })
        };
        let envelope = if cols[4].trim().is_empty() {
            None
        } else {
            Some(num(4)?)
        };
        records.push(DiagnosticsRecord {
            t: num(0)?,
            enstrophy: num(1)?,
            energy: num(2)?,
            forcing_norm2: num(3)?,
            envelope,
        });
    }
    Ok(records)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    parse_diagnostics(&std::fs::read_to_string(path)?)
}

pub fn encode_field(f: &SpectralField) -> Vec<u8> {
    let d = f.domain();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.coeffs().len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(d.mx() as u32).to_le_bytes());
    out.extend_from_slice(&(d.my() as u32).to_le_bytes());
    out.extend_from_slice(&d.lx().to_le_bytes());
    out.extend_from_slice(&d.ly().to_le_bytes());
    for c in f.coeffs() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn write_field(f: &SpectralField, path: &Path) -> Result<()> {
    write_atomic(path, &encode_field(f))
}

/// Decodes a checkpoint onto a domain with the default padded mesh.
pub fn decode_field(bytes: &[u8]) -> Result<SpectralField> {
    if bytes.len() < 8 {
        return Err(Error::Format(
            "truncated checkpoint: missing magic".to_string(),
        ));
    }
    if &bytes[..8] != FIELD_MAGIC {
        if bytes.starts_with(b"QGFIELD") {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {:?}",
                String::from_utf8_lossy(&bytes[..8])
            )));
        }
        return Err(Error::Format(
            "not a QGFIELD checkpoint (magic mismatch)".to_string(),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated checkpoint header".to_string()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let mx = u32_at(8) as usize;
    let my = u32_at(12) as usize;
    let lx = f64_at(16);
    let ly = f64_at(24);
    let count = mx
        .checked_mul(my)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("checkpoint dimensions {mx}x{my} overflow")))?;
    let expected = HEADER_LEN
        .checked_add(count)
        .ok_or_else(|| Error::Format(format!("checkpoint dimensions {mx}x{my} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::Format(format!(
            "truncated checkpoint: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - expected
        )));
    }
    let domain = Arc::new(Domain::new(lx, ly, mx, my)?);
    let coeffs = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SpectralField::from_coeffs(&domain, coeffs)
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    decode_field(&std::fs::read(path)?)
}
