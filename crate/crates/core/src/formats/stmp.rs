use std::path::Path;

use super::{read_file, write_atomic, ByteReader, ByteWriter};
use crate::error::Result;
use crate::stmap::SpatialTemporalMap;

const MAGIC: &[u8; 4] = b"STMP";
const VERSION: u32 = 1;

/// Magic, version, u32 n/T/C, f64 rate, u8 mask[T], then f32 values in the
/// map's block-major order.
pub fn stmp_bytes(map: &SpatialTemporalMap) -> Result<Vec<u8>> {
    let mut w = ByteWriter::header(MAGIC, VERSION);
    w.dim(map.blocks())?;
    w.dim(map.frames())?;
    w.dim(map.channels())?;
    w.f64(map.frame_rate_hz());
    for &m in map.mask() {
        w.u8(m as u8);
    }
    for &v in map.values() {
        w.f32(v as f32);
    }
    Ok(w.buf)
}

pub fn stmp_from_bytes(bytes: &[u8], path: &Path) -> Result<SpatialTemporalMap> {
    let mut r = ByteReader::open(bytes, path, MAGIC, VERSION)?;
    let (n, t, c) = (r.dim()?, r.dim()?, r.dim()?);
    let fps = r.f64()?;
    let count = n
        .checked_mul(t)
        .and_then(|x| x.checked_mul(c))
        .ok_or_else(|| r.error("dimensions overflow"))?;
    if r.remaining() != t + 4 * count {
        return Err(r.error(format!(
            "{n}x{t}x{c} map needs {} payload bytes, found {}",
            t + 4 * count,
            r.remaining()
        )));
    }
    let mut mask = Vec::with_capacity(t);
    for _ in 0..t {
        match r.u8()? {
            0 => mask.push(false),
            1 => mask.push(true),
            b => return Err(r.error(format!("mask byte {b} is not 0 or 1"))),
        }
    }
    let values = (0..count)
        .map(|_| r.f32().map(f64::from))
        .collect::<Result<Vec<_>>>()?;
    SpatialTemporalMap::new(n, t, c, fps, values, mask).map_err(|e| r.error(e.to_string()))
}

pub fn write_stmp(path: &Path, map: &SpatialTemporalMap) -> Result<()> {
    write_atomic(path, &stmp_bytes(map)?)
}

pub fn read_stmp(path: &Path) -> Result<SpatialTemporalMap> {
    stmp_from_bytes(&read_file(path)?, path)
}
