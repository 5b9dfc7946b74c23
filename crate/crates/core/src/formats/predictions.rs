use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_rows, parse_field, read_text, write_atomic};
use crate::error::{Error, Result};

const PREDICTIONS_HEADER: &str = "video_id,level,clip_index,start_frame,hr_bpm";
const HR_HEADER: &str = "video_id,hr_bpm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Clip,
    Video,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Clip => "clip",
            Level::Video => "video",
        }
    }
}

/// One HR estimate. Clip rows carry their index and first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub video_id: String,
    pub level: Level,
    pub clip_index: Option<usize>,
    pub start_frame: Option<usize>,
    pub hr_bpm: f64,
}

impl PredictionRow {
    pub fn video(video_id: &str, hr_bpm: f64) -> Self {
        Self {
            video_id: video_id.to_string(),
            level: Level::Video,
            clip_index: None,
            start_frame: None,
            hr_bpm,
        }
    }

    pub fn clip(video_id: &str, clip_index: usize, start_frame: usize, hr_bpm: f64) -> Self {
        Self {
            video_id: video_id.to_string(),
            level: Level::Clip,
            clip_index: Some(clip_index),
            start_frame: Some(start_frame),
            hr_bpm,
        }
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn predictions_csv(rows: &[PredictionRow]) -> Result<String> {
    let mut s = format!("{PREDICTIONS_HEADER}\n");
    for r in rows {
        if r.video_id.is_empty() || r.video_id.contains([',', '\n', '\r']) {
            return Err(Error::InvalidInput(format!("video id {:?} cannot be written to CSV", r.video_id)));
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.video_id,
            r.level.name(),
            opt(r.clip_index),
            opt(r.start_frame),
            r.hr_bpm
        );
    }
    Ok(s)
}

pub fn write_predictions_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_atomic(path, predictions_csv(rows)?.as_bytes())
}

/// Reads either a predictions CSV or a two-column `video_id,hr_bpm` file
/// (whose rows are video level).
pub fn read_hr_table(path: &Path) -> Result<Vec<PredictionRow>> {
    let text = read_text(path)?;
    let first = text.lines().next().unwrap_or("").trim();
    if first == HR_HEADER {
        return csv_rows(&text, HR_HEADER, path)?
            .into_iter()
            .map(|(line, f)| {
                if f.len() != 2 || f[0].is_empty() {
                    return Err(Error::format(path, format!("line {line}: expected `video_id,hr_bpm`")));
                }
                Ok(PredictionRow::video(f[0], parse_field(f[1], line, "hr_bpm", path)?))
            })
            .collect();
    }
    csv_rows(&text, PREDICTIONS_HEADER, path)?
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 5 || f[0].is_empty() {
                return Err(Error::format(path, format!("line {line}: expected 5 fields")));
            }
            let hr = parse_field(f[4], line, "hr_bpm", path)?;
            match f[1] {
                "video" => Ok(PredictionRow::video(f[0], hr)),
                "clip" => Ok(PredictionRow::clip(
                    f[0],
                    parse_field(f[2], line, "clip_index", path)?,
                    parse_field(f[3], line, "start_frame", path)?,
                    hr,
                )),
                l => Err(Error::format(path, format!("line {line}: unknown level `{l}`"))),
            }
        })
        .collect()
}
