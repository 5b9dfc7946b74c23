use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};

use super::{csv_rows, parse_field, read_file, read_text, write_atomic, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::stmap::{ColorSpace, FrameSequence, LandmarkTrack, Landmarks, Point, NUM_LANDMARKS};

const FSEQ_MAGIC: &[u8; 4] = b"FSEQ";
const FSEQ_VERSION: u32 = 1;

fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Raw 8-bit video: magic, version, u32 W/H/C, f64 fps, then frames back to
/// back. The frame count follows from the file length. Values are rounded and
/// clamped to 0–255.
pub fn write_fseq(path: &Path, seq: &FrameSequence) -> Result<()> {
    let mut w = ByteWriter::header(FSEQ_MAGIC, FSEQ_VERSION);
    w.dim(seq.width())?;
    w.dim(seq.height())?;
    w.dim(seq.channels())?;
    w.f64(seq.frame_rate_hz());
    w.buf.reserve(seq.len() * seq.frame(0).len());
    for f in seq.frames() {
        w.buf.extend(f.iter().map(|&v| to_u8(v)));
    }
    write_atomic(path, &w.buf)
}

pub fn read_fseq(path: &Path) -> Result<FrameSequence> {
    let bytes = read_file(path)?;
    let mut r = ByteReader::open(&bytes, path, FSEQ_MAGIC, FSEQ_VERSION)?;
    let (w, h, c) = (r.dim()?, r.dim()?, r.dim()?);
    let fps = r.f64()?;
    let color = ColorSpace::from_channels(c).map_err(|e| r.error(e.to_string()))?;
    let size = w * h * c;
    if size == 0 || r.remaining() % size != 0 {
        return Err(r.error(format!(
            "{} payload bytes is not a whole number of {w}x{h}x{c} frames",
            r.remaining()
        )));
    }
    let n = r.remaining() / size;
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        frames.push(r.take(size)?.iter().map(|&b| b as f32).collect());
    }
    FrameSequence::new(w, h, color, fps, frames).map_err(|e| r.error(e.to_string()))
}

fn is_frame_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "ppm")
    )
}

/// Reads every PNG/PGM/PPM file in `dir` in file-name order (zero-padded
/// numbering sorts correctly). Grayscale images give a one-channel
/// sequence, colour images RGB; alpha is dropped.
pub fn read_frame_dir(dir: &Path, fps: f64) -> Result<FrameSequence> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_frame_file(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no PNG/PGM frames found"));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut geometry = None;
    for f in &files {
        let img = image::open(f).map_err(|e| Error::format(f, e.to_string()))?;
        let gray = !img.color().has_color();
        let (w, h, data) = if gray {
            let g = img.to_luma8();
            (g.width(), g.height(), g.into_raw())
        } else {
            let c = img.to_rgb8();
            (c.width(), c.height(), c.into_raw())
        };
        let g = (w, h, gray);
        if *geometry.get_or_insert(g) != g {
            return Err(Error::format(f, "frame geometry or colour differs from the first frame"));
        }
        frames.push(data.into_iter().map(f32::from).collect());
    }
    let (w, h, gray) = geometry.unwrap();
    let color = if gray { ColorSpace::Gray } else { ColorSpace::Rgb };
    FrameSequence::new(w as usize, h as usize, color, fps, frames)
}

/// Writes `frame_00000.png`, ... (8-bit, rounded and clamped).
pub fn write_frame_dir(dir: &Path, seq: &FrameSequence) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let digits = seq.len().saturating_sub(1).to_string().len().max(5);
    let (w, h) = (seq.width() as u32, seq.height() as u32);
    for (t, f) in seq.frames().iter().enumerate() {
        let raw: Vec<u8> = f.iter().map(|&v| to_u8(v)).collect();
        let img = match seq.color() {
            ColorSpace::Gray => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, raw).unwrap()),
            ColorSpace::Rgb => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, raw).unwrap()),
        };
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| Error::InvalidInput(format!("png encoding: {e}")))?;
        write_atomic(&dir.join(format!("frame_{t:0digits$}.png")), &bytes)?;
    }
    Ok(())
}

/// A directory of frame images or an FSEQ file. `fps` applies to
/// directories only; FSEQ files carry their own rate.
pub fn read_video(path: &Path, fps: f64) -> Result<FrameSequence> {
    if path.is_dir() {
        read_frame_dir(path, fps)
    } else {
        read_fseq(path)
    }
}

fn landmark_header() -> String {
    let mut s = String::from("frame_idx,valid");
    for i in 0..NUM_LANDMARKS {
        let _ = write!(s, ",x{i},y{i}");
    }
    s
}

pub fn write_landmarks_csv(path: &Path, track: &LandmarkTrack) -> Result<()> {
    let mut s = landmark_header();
    s.push('\n');
    for t in 0..track.len() {
        let _ = write!(s, "{t},{}", track.is_valid(t) as u8);
        for p in track.points(t) {
            let _ = write!(s, ",{},{}", p.x, p.y);
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Rows must be numbered `0, 1, ...`. Coordinates of invalid frames are
/// not used and may be empty or `nan`.
pub fn read_landmarks_csv(path: &Path) -> Result<LandmarkTrack> {
    let text = read_text(path)?;
    let rows = csv_rows(&text, &landmark_header(), path)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut valid = Vec::with_capacity(rows.len());
    for (k, (line, f)) in rows.iter().enumerate() {
        if f.len() != 2 + 2 * NUM_LANDMARKS {
            return Err(Error::format(
                path,
                format!("line {line}: expected {} fields, found {}", 2 + 2 * NUM_LANDMARKS, f.len()),
            ));
        }
        let idx: usize = parse_field(f[0], *line, "frame index", path)?;
        if idx != k {
            return Err(Error::format(path, format!("line {line}: frame {idx} out of order")));
        }
        let ok = match f[1] {
            "1" => true,
            "0" => false,
            v => return Err(Error::format(path, format!("line {line}: bad valid flag `{v}`"))),
        };
        let mut pts: Landmarks = [Point::default(); NUM_LANDMARKS];
        if ok {
            for (i, p) in pts.iter_mut().enumerate() {
                p.x = parse_field(f[2 + 2 * i], *line, "x coordinate", path)?;
                p.y = parse_field(f[3 + 2 * i], *line, "y coordinate", path)?;
            }
        }
        points.push(pts);
        valid.push(ok);
    }
    LandmarkTrack::new(points, valid).map_err(|e| Error::format(path, e.to_string()))
}
