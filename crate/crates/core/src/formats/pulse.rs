use std::fmt::Write as _;
use std::path::Path;

use super::{csv_rows, parse_field, read_file, read_text, write_atomic, ByteReader, ByteWriter};
use crate::classic::RgbTrace;
use crate::error::{Error, Result};
use crate::signal::PulseTrace;

const PTRC_MAGIC: &[u8; 4] = b"PTRC";
const PTRC_VERSION: u32 = 1;
const PULSE_HEADER: &str = "t_sec,value";
const RGB_HEADER: &str = "frame,r,g,b";

/// Binary pulse trace: magic, version, u32 count, f64 rate, f64 samples.
pub fn write_pulse(path: &Path, trace: &PulseTrace) -> Result<()> {
    let mut w = ByteWriter::header(PTRC_MAGIC, PTRC_VERSION);
    w.dim(trace.len())?;
    w.f64(trace.sample_rate_hz());
    for &v in trace.samples() {
        w.f64(v);
    }
    write_atomic(path, &w.buf)
}

pub fn read_pulse(path: &Path) -> Result<PulseTrace> {
    let bytes = read_file(path)?;
    let mut r = ByteReader::open(&bytes, path, PTRC_MAGIC, PTRC_VERSION)?;
    let n = r.dim()?;
    let fs = r.f64()?;
    if r.remaining() != n * 8 {
        return Err(r.error(format!("{n} samples declared, {} bytes follow", r.remaining())));
    }
    let samples = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    PulseTrace::new(samples, fs).map_err(|e| r.error(e.to_string()))
}

pub fn write_pulse_csv(path: &Path, trace: &PulseTrace) -> Result<()> {
    let mut s = format!("{PULSE_HEADER}\n");
    let fs = trace.sample_rate_hz();
    for (i, v) in trace.samples().iter().enumerate() {
        let _ = writeln!(s, "{},{}", i as f64 / fs, v);
    }
    write_atomic(path, s.as_bytes())
}

/// Reads a pulse CSV; the sample rate is inferred from the time column,
/// which must be uniformly spaced.
pub fn read_pulse_csv(path: &Path) -> Result<PulseTrace> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, PULSE_HEADER, path)?;
    let mut t = Vec::with_capacity(rows.len());
    let mut v = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        if f.len() != 2 {
            return Err(Error::format(path, format!("line {line}: expected 2 fields")));
        }
        t.push(parse_field::<f64>(f[0], *line, "time", path)?);
        v.push(parse_field::<f64>(f[1], *line, "value", path)?);
    }
    if t.len() < 2 {
        return Err(Error::format(path, "need at least 2 samples"));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let uniform = t
        .iter()
        .enumerate()
        .all(|(i, &ti)| (ti - t[0] - i as f64 * dt).abs() <= 1e-6 * dt.abs().max(1.0));
    if !(dt > 0.0) || !uniform {
        return Err(Error::format(path, "time column is not uniformly increasing"));
    }
    PulseTrace::new(v, 1.0 / dt).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_rgb_trace_csv(path: &Path, trace: &RgbTrace) -> Result<()> {
    let mut s = format!("{RGB_HEADER}\n");
    for i in 0..trace.len() {
        let _ = writeln!(s, "{},{},{},{}", i, trace.r[i], trace.g[i], trace.b[i]);
    }
    write_atomic(path, s.as_bytes())
}

/// Reads an RGB trace; rows must be numbered `0, 1, ...`.
pub fn read_rgb_trace_csv(path: &Path, sample_rate_hz: f64) -> Result<RgbTrace> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, RGB_HEADER, path)?;
    let (mut r, mut g, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for (k, (line, f)) in rows.iter().enumerate() {
        if f.len() != 4 {
            return Err(Error::format(path, format!("line {line}: expected 4 fields")));
        }
        let idx: usize = parse_field(f[0], *line, "frame index", path)?;
        if idx != k {
            return Err(Error::format(path, format!("line {line}: frame {idx} out of order")));
        }
        r.push(parse_field(f[1], *line, "r", path)?);
        g.push(parse_field(f[2], *line, "g", path)?);
        b.push(parse_field(f[3], *line, "b", path)?);
    }
    RgbTrace::new(r, g, b, sample_rate_hz).map_err(|e| Error::format(path, e.to_string()))
}
