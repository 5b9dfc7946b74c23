//! On-disk formats. Binary files start with a 4-byte magic and a `u32`
//! version and are little-endian throughout; text files are CSV identified by
//! an exact header row. All writers replace the target atomically.

mod predictions;
mod pulse;
mod stmp;
mod video;

pub use predictions::{
    predictions_csv, read_hr_table, write_predictions_csv, Level, PredictionRow,
};
pub use pulse::{
    read_pulse, read_pulse_csv, read_rgb_trace_csv, write_pulse, write_pulse_csv,
    write_rgb_trace_csv,
};
pub use stmp::{read_stmp, stmp_bytes, stmp_from_bytes, write_stmp};
pub use video::{
    read_frame_dir, read_fseq, read_landmarks_csv, read_video, write_frame_dir, write_fseq,
    write_landmarks_csv,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp: PathBuf = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn header(magic: &[u8; 4], version: u32) -> Self {
        let mut w = Self::default();
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// `usize` as `u32`, for dimensions.
    pub fn dim(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("dimension {v} too large")))?;
        self.u32(v);
        Ok(())
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    /// Checks magic and version; errors name `path`.
    pub fn open(buf: &'a [u8], path: &'a Path, magic: &[u8; 4], version: u32) -> Result<Self> {
        let mut r = Self { buf, pos: 0, path };
        let m = r.take(4)?;
        if m != magic {
            return Err(Error::format(
                path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(m),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        let v = r.u32()?;
        if v != version {
            return Err(Error::format(
                path,
                format!("unsupported version {v}, expected {version}"),
            ));
        }
        Ok(r)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                format!("truncated at byte {} (needed {n} more)", self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn dim(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(
                self.path,
                format!("{} trailing bytes", self.remaining()),
            ));
        }
        Ok(())
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::format(self.path, msg)
    }
}

/// Data rows of a CSV whose first line must equal `header`. Blank lines
/// are skipped; each row is returned with its 1-based line number.
pub(crate) fn csv_rows<'a>(
    text: &'a str,
    header: &str,
    path: &Path,
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    let first = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if first != header {
        return Err(Error::format(
            path,
            format!("expected header `{header}`, found `{first}`"),
        ));
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect())
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    s: &str,
    line: usize,
    what: &str,
    path: &Path,
) -> Result<T> {
    s.parse()
        .map_err(|_| Error::format(path, format!("line {line}: bad {what} `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"first version").unwrap();
        write_atomic(&p, b"2nd").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"2nd");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_into_missing_dir_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope").join("x.bin");
        assert!(matches!(write_atomic(&p, b"x"), Err(Error::Io { .. })));
    }

    #[test]
    fn reader_rejects_magic_version_and_truncation() {
        let p = Path::new("mem");
        let mut w = ByteWriter::header(b"ABCD", 2);
        w.f64(1.5);
        let ok = w.buf.clone();
        let mut r = ByteReader::open(&ok, p, b"ABCD", 2).unwrap();
        assert_eq!(r.f64().unwrap(), 1.5);
        r.finish().unwrap();
        assert!(matches!(ByteReader::open(&ok, p, b"ABCE", 2), Err(Error::Format { .. })));
        assert!(matches!(ByteReader::open(&ok, p, b"ABCD", 3), Err(Error::Format { .. })));
        let mut r = ByteReader::open(&ok[..10], p, b"ABCD", 2).unwrap();
        assert!(matches!(r.f64(), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_header_enforced() {
        let p = Path::new("mem.csv");
        let rows = csv_rows("a,b\n1,2\n\n3, 4\n", "a,b", p).unwrap();
        assert_eq!(rows, vec![(2, vec!["1", "2"]), (4, vec!["3", "4"])]);
        assert!(csv_rows("x,y\n1,2\n", "a,b", p).is_err());
    }
}
