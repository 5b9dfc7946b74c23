use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::{csv_rows, parse_field, read_stmp, read_text, write_atomic, write_stmp};
use crate::nnet::Sample;
use crate::stmap::SpatialTemporalMap;

/// Name of the table listing the maps of a directory.
pub const INDEX_FILE: &str = "index.csv";
const INDEX_HEADER: &str = "file,video_id,clip_index,start_frame,hr_bpm";

/// One clip map with its provenance and, when known, its HR label.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEntry {
    pub file: String,
    pub video_id: String,
    pub clip_index: usize,
    pub start_frame: usize,
    pub hr_bpm: Option<f64>,
    pub map: SpatialTemporalMap,
}

impl MapEntry {
    pub fn new(video_id: &str, clip_index: usize, start_frame: usize, hr_bpm: Option<f64>, map: SpatialTemporalMap) -> Self {
        Self {
            file: format!("{video_id}_clip{clip_index:03}.stmp"),
            video_id: video_id.to_string(),
            clip_index,
            start_frame,
            hr_bpm,
            map,
        }
    }
}

fn check_name(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.contains([',', '\n', '\r', '/', '\\']) {
        return Err(Error::InvalidInput(format!("{what} {s:?} is not usable as a file or CSV field")));
    }
    Ok(())
}

/// Writes each map as STMP plus [`INDEX_FILE`]; the index goes last, so a
/// directory with an index is complete.
pub fn write_map_set(dir: &Path, entries: &[MapEntry]) -> Result<()> {
    let mut index = format!("{INDEX_HEADER}\n");
    for e in entries {
        check_name(&e.file, "file name")?;
        check_name(&e.video_id, "video id")?;
        let hr = e.hr_bpm.map(|h| h.to_string()).unwrap_or_default();
        let _ = writeln!(index, "{},{},{},{},{hr}", e.file, e.video_id, e.clip_index, e.start_frame);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        write_stmp(&dir.join(&e.file), &e.map)?;
    }
    write_atomic(&dir.join(INDEX_FILE), index.as_bytes())
}

pub fn read_map_set(dir: &Path) -> Result<Vec<MapEntry>> {
    let path = dir.join(INDEX_FILE);
    let text = read_text(&path)?;
    let rows = csv_rows(&text, INDEX_HEADER, &path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if f.len() != 5 {
            return Err(Error::format(&path, format!("line {line}: expected 5 fields")));
        }
        check_name(f[0], "file name").map_err(|e| Error::format(&path, e.to_string()))?;
        let hr_bpm = if f[4].is_empty() {
            None
        } else {
            Some(parse_field(f[4], line, "hr_bpm", &path)?)
        };
        out.push(MapEntry {
            file: f[0].to_string(),
            video_id: f[1].to_string(),
            clip_index: parse_field(f[2], line, "clip_index", &path)?,
            start_frame: parse_field(f[3], line, "start_frame", &path)?,
            hr_bpm,
            map: read_stmp(&dir.join(f[0]))?,
        });
    }
    if out.is_empty() {
        return Err(Error::format(&path, "index lists no maps"));
    }
    Ok(out)
}

/// Training samples; every entry must carry a label.
pub fn labelled_samples(entries: &[MapEntry]) -> Result<Vec<Sample>> {
    entries
        .iter()
        .map(|e| {
            let hr = e.hr_bpm.ok_or_else(|| {
                Error::InvalidInput(format!("map {} has no HR label", e.file))
            })?;
            Ok(Sample::new(e.map.clone(), hr))
        })
        .collect()
}
