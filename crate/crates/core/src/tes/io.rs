//! Trace file formats.
//!
//! Binary layout, little-endian: `b"TES1"`, `u32` pulses, `u32` samples,
//! `f64` sample period, then row-major `f32` samples. CSV holds one trace per
//! row with an optional `# sample_period=<seconds>` comment line.

use std::io::{BufRead, Read, Write};

use super::{Result, TesError, TraceSet};

pub const MAGIC: &[u8; 4] = b"TES1";
const HEADER_LEN: u64 = 20;

pub fn write_binary<W: Write>(mut w: W, traces: &TraceSet) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| TesError::Domain(format!("{what} {v} does not fit the binary header")))
    };
    w.write_all(MAGIC)?;
    w.write_all(&to_u32(traces.num_pulses(), "pulse count")?.to_le_bytes())?;
    w.write_all(&to_u32(traces.num_samples(), "sample count")?.to_le_bytes())?;
    w.write_all(&traces.sample_period.to_le_bytes())?;
    let mut buf = Vec::with_capacity(traces.as_slice().len() * 4);
    for v in traces.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<TraceSet> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn decode_binary(bytes: &[u8]) -> Result<TraceSet> {
    if bytes.is_empty() {
        return Err(TesError::Empty);
    }
    let format = |offset: usize, message: String| TesError::Format {
        offset: offset as u64,
        message,
    };
    if bytes.len() < HEADER_LEN as usize {
        return Err(format(bytes.len(), format!("header truncated: {} of {HEADER_LEN} bytes", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let num_pulses = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let num_samples = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let sample_period = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    if num_samples < super::MIN_SAMPLES {
        return Err(format(8, format!("sample count {num_samples} below {}", super::MIN_SAMPLES)));
    }
    if !(sample_period.is_finite() && sample_period > 0.0) {
        return Err(format(12, format!("sample period {sample_period} must be > 0")));
    }
    if num_pulses == 0 {
        return Err(TesError::Empty);
    }
    let body = &bytes[HEADER_LEN as usize..];
    let expected = num_pulses
        .checked_mul(num_samples)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| format(4, "header dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(format(
            HEADER_LEN as usize + body.len().min(expected),
            format!("expected {expected} payload bytes, found {}", body.len()),
        ));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(format(HEADER_LEN as usize + 4 * i, "non-finite sample".into()));
    }
    TraceSet::new(data, num_pulses, num_samples, sample_period)
}

pub fn write_csv<W: Write>(mut w: W, traces: &TraceSet) -> Result<()> {
    writeln!(w, "# sample_period={:e}", traces.sample_period)?;
    let mut line = String::new();
    for row in traces.rows() {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parse CSV traces; `default_period` applies when the file has no period comment.
pub fn read_csv<R: BufRead>(r: R, default_period: Option<f64>) -> Result<TraceSet> {
    let mut offset = 0u64;
    let mut period = default_period;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for line in r.lines() {
        let line = line?;
        let start = offset;
        offset += line.len() as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("sample_period=") {
                period = Some(v.trim().parse().map_err(|_| TesError::Format {
                    offset: start,
                    message: format!("bad sample period `{}`", v.trim()),
                })?);
            }
            continue;
        }
        let before = data.len();
        let mut col_offset = start;
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| TesError::Format {
                offset: col_offset,
                message: format!("bad sample `{}`", field.trim()),
            })?;
            data.push(v);
            col_offset += field.len() as u64 + 1;
        }
        let n = data.len() - before;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(TesError::Format {
                    offset: start,
                    message: format!("row has {n} samples, expected {w}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(TesError::Empty);
    };
    let period = period.ok_or_else(|| TesError::Format {
        offset: 0,
        message: "no `# sample_period=` line and no default period".into(),
    })?;
    TraceSet::new(data, rows, width, period)
}

/// Read by extension: `.csv` as CSV, anything else as binary.
pub fn read_path(path: &std::path::Path, default_period: Option<f64>) -> Result<TraceSet> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(std::io::BufReader::new(file), default_period)
    } else {
        read_binary(std::io::BufReader::new(file))
    }
}
