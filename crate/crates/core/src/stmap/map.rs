use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::color::{rgb_to_yuv, SkinSegmenter};
use super::frames::{ColorSpace, FrameSequence};
use super::landmarks::{LandmarkLayout, LandmarkTrack, Point};
use super::roi::{compute_roi, RoiBox};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Default sliding-window length in frames.
pub const DEFAULT_WINDOW: usize = 300;
/// Default sliding-window stride (50% overlap).
pub const DEFAULT_STRIDE: usize = 150;
/// Default block grid (25 blocks).
pub const DEFAULT_GRID: Grid = Grid { rows: 5, cols: 5 };
pub const DEFAULT_MASK_PROB: f64 = 0.5;
pub const DEFAULT_MASK_LEN: (usize, usize) = (10, 30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn blocks(&self) -> usize {
        self.rows * self.cols
    }
}

impl Default for Grid {
    fn default() -> Self {
        DEFAULT_GRID
    }
}

/// Channels recorded per block. Gray input always yields one raw channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapColor {
    #[default]
    Yuv,
    /// Raw RGB means, used by the classical extractors.
    Rgb,
}

#[derive(Debug, Clone)]
pub struct StmapOptions {
    pub grid: Grid,
    pub color: MapColor,
    pub skin: SkinSegmenter,
    pub layout: LandmarkLayout,
    pub exec: Exec,
}

impl Default for StmapOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            color: MapColor::Yuv,
            skin: SkinSegmenter::Chroma,
            layout: LandmarkLayout::default(),
            exec: Exec::default(),
        }
    }
}

/// `n x T x C` block means, stored block-major: value `(b, t, c)` lives at
/// `(b * T + t) * C + c`. `mask[t]` marks columns zeroed by augmentation or
/// detector failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTemporalMap {
    blocks: usize,
    frames: usize,
    channels: usize,
    frame_rate_hz: f64,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl SpatialTemporalMap {
    pub fn new(
        blocks: usize,
        frames: usize,
        channels: usize,
        frame_rate_hz: f64,
        values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if blocks == 0 || frames == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::Shape(format!(
                "invalid map shape {blocks}x{frames}x{channels}"
            )));
        }
        if values.len() != blocks * frames * channels || mask.len() != frames {
            return Err(Error::Shape(format!(
                "map {blocks}x{frames}x{channels} given {} values and {} mask flags",
                values.len(),
                mask.len()
            )));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "map frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("map contains non-finite values".into()));
        }
        let mut map = Self {
            blocks,
            frames,
            channels,
            frame_rate_hz,
            values,
            mask,
        };
        for t in 0..frames {
            if map.mask[t] {
                map.zero_column(t);
            }
        }
        Ok(map)
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    #[inline]
    pub fn get(&self, block: usize, t: usize, c: usize) -> f64 {
        self.values[(block * self.frames + t) * self.channels + c]
    }

    /// Time series of one block and channel.
    pub fn row(&self, block: usize, c: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.get(block, t, c)).collect()
    }

    fn zero_column(&mut self, t: usize) {
        for b in 0..self.blocks {
            let i = (b * self.frames + t) * self.channels;
            self.values[i..i + self.channels].fill(0.0);
        }
    }

    /// Zeroes columns `[start, start + len)` and flags them.
    pub fn mask_run(&mut self, start: usize, len: usize) -> Result<()> {
        if start + len > self.frames {
            return Err(Error::Config(format!(
                "mask run {start}+{len} exceeds {} frames",
                self.frames
            )));
        }
        for t in start..start + len {
            self.mask[t] = true;
            self.zero_column(t);
        }
        Ok(())
    }

    /// Per-channel min–max normalization over unmasked columns. A channel
    /// whose unmasked values are all equal becomes 0.5. Masked columns stay 0.
    pub fn normalized(&self) -> SpatialTemporalMap {
        let mut out = self.clone();
        for c in 0..self.channels {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for b in 0..self.blocks {
                for t in (0..self.frames).filter(|&t| !self.mask[t]) {
                    let v = self.get(b, t, c);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let range = hi - lo;
            for b in 0..self.blocks {
                for t in (0..self.frames).filter(|&t| !self.mask[t]) {
                    let i = (b * self.frames + t) * self.channels + c;
                    out.values[i] = if range > 0.0 {
                        (self.values[i] - lo) / range
                    } else {
                        0.5
                    };
                }
            }
        }
        out
    }

    /// Columns `[start, end)` as a new map.
    pub fn slice(&self, start: usize, end: usize) -> Result<SpatialTemporalMap> {
        if start >= end || end > self.frames {
            return Err(Error::Config(format!(
                "invalid slice [{start}, {end}) of {} frames",
                self.frames
            )));
        }
        let len = end - start;
        let mut values = Vec::with_capacity(self.blocks * len * self.channels);
        for b in 0..self.blocks {
            let i = (b * self.frames + start) * self.channels;
            values.extend_from_slice(&self.values[i..i + len * self.channels]);
        }
        Ok(SpatialTemporalMap {
            blocks: self.blocks,
            frames: len,
            channels: self.channels,
            frame_rate_hz: self.frame_rate_hz,
            values,
            mask: self.mask[start..end].to_vec(),
        })
    }
}

/// Skin-masked ROI pixel means for one frame, per block and channel
/// (`blocks * channels` values), or `None` when no ROI pixel is skin.
///
/// Blocks without skin pixels take the whole-ROI mean. Color conversion is
/// applied to the block means, which equals the mean of converted pixels
/// since the transform is affine.
fn frame_column(
    seq: &FrameSequence,
    t: usize,
    roi: &RoiBox,
    opts: &StmapOptions,
) -> Option<Vec<f64>> {
    let grid = opts.grid;
    let ch = seq.channels();
    let rule = opts.skin.rule();
    let (x0, x1, y0, y1) = roi.pixel_bounds(seq.width(), seq.height());
    let (bw, bh) = (roi.width(), roi.height());

    let mut sums = vec![0.0f64; grid.blocks() * ch];
    let mut counts = vec![0usize; grid.blocks()];
    for y in y0..y1 {
        for x in x0..x1 {
            let (u, v) = roi.to_box(Point::new(x as f64 + 0.5, y as f64 + 0.5));
            if !(u >= 0.0 && u < bw && v >= 0.0 && v < bh) {
                continue;
            }
            let px = seq.pixel(t, x, y);
            let skin = match (&opts.skin, seq.color()) {
                (SkinSegmenter::External(m), _) => m.get(x, y),
                (_, ColorSpace::Gray) | (SkinSegmenter::All, _) => true,
                (_, ColorSpace::Rgb) => rule
                    .expect("chroma segmenter")
                    .is_skin(px[0] as f64, px[1] as f64, px[2] as f64),
            };
            if !skin {
                continue;
            }
            let row = ((v / bh * grid.rows as f64) as usize).min(grid.rows - 1);
            let col = ((u / bw * grid.cols as f64) as usize).min(grid.cols - 1);
            let b = row * grid.cols + col;
            counts[b] += 1;
            for c in 0..ch {
                sums[b * ch + c] += px[c] as f64;
            }
        }
    }

    let total: usize = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let roi_mean: Vec<f64> = (0..ch)
        .map(|c| (0..grid.blocks()).map(|b| sums[b * ch + c]).sum::<f64>() / total as f64)
        .collect();

    let mut column = Vec::with_capacity(grid.blocks() * ch);
    for b in 0..grid.blocks() {
        let mean: Vec<f64> = if counts[b] == 0 {
            roi_mean.clone()
        } else {
            (0..ch).map(|c| sums[b * ch + c] / counts[b] as f64).collect()
        };
        match (seq.color(), opts.color) {
            (ColorSpace::Rgb, MapColor::Yuv) => {
                column.extend_from_slice(&rgb_to_yuv(mean[0], mean[1], mean[2]))
            }
            _ => column.extend_from_slice(&mean),
        }
    }
    Some(column)
}

/// Spatial-temporal map before normalization.
///
/// Per frame: ROI from the landmarks, skin mask, block means; frames whose
/// landmarks are flagged invalid, whose ROI is degenerate, or whose skin mask
/// is empty become zero columns with `mask[t] = true`.
pub fn build_stmap_raw(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    opts: &StmapOptions,
) -> Result<SpatialTemporalMap> {
    if opts.grid.rows == 0 || opts.grid.cols == 0 {
        return Err(Error::Config("grid must have at least one block".into()));
    }
    if let SkinSegmenter::External(m) = &opts.skin {
        if m.width != seq.width() || m.height != seq.height() {
            return Err(Error::Shape(format!(
                "skin mask is {}x{}, frames are {}x{}",
                m.width,
                m.height,
                seq.width(),
                seq.height()
            )));
        }
    }
    track.check_against(seq.len(), seq.width(), seq.height())?;
    if track.valid_count() == 0 {
        return Err(Error::InvalidInput("no frame has valid landmarks".into()));
    }

    let columns: Vec<Option<Vec<f64>>> = opts.exec.map(seq.len(), |t| {
        if !track.is_valid(t) {
            return None;
        }
        let roi = compute_roi(track.points(t), &opts.layout).ok()?;
        frame_column(seq, t, &roi, opts)
    });
    if columns.iter().all(Option::is_none) {
        return Err(Error::InvalidInput(
            "no frame produced a usable skin region".into(),
        ));
    }

    let n = opts.grid.blocks();
    let ch = match (seq.color(), opts.color) {
        (ColorSpace::Gray, _) => 1,
        _ => 3,
    };
    let frames = seq.len();
    let mut values = vec![0.0; n * frames * ch];
    let mut mask = vec![false; frames];
    for (t, col) in columns.into_iter().enumerate() {
        match col {
            Some(col) => {
                for b in 0..n {
                    let dst = (b * frames + t) * ch;
                    values[dst..dst + ch].copy_from_slice(&col[b * ch..(b + 1) * ch]);
                }
            }
            None => mask[t] = true,
        }
    }
    SpatialTemporalMap::new(n, frames, ch, seq.frame_rate_hz(), values, mask)
}

/// Normalized spatial-temporal map of the whole sequence.
pub fn build_stmap(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    opts: &StmapOptions,
) -> Result<SpatialTemporalMap> {
    Ok(build_stmap_raw(seq, track, opts)?.normalized())
}

/// Half-open frame interval of one clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clip {
    pub start: usize,
    pub end: usize,
}

/// Clips `[k * stride, k * stride + window)` that fit in `seq_len` frames.
pub fn sliding_clips(seq_len: usize, window: usize, stride: usize) -> Result<Vec<Clip>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "window ({window}) and stride ({stride}) must be positive"
        )));
    }
    if window > seq_len {
        return Err(Error::InvalidInput(format!(
            "sequence too short: {seq_len} frames for a {window}-frame window"
        )));
    }
    Ok((0..=(seq_len - window) / stride)
        .map(|k| Clip {
            start: k * stride,
            end: k * stride + window,
        })
        .collect())
}

/// Temporal masking augmentation: with probability `p_mask` one contiguous
/// run of `L ~ U{lo..=hi}` columns starting at `s ~ U{0..=T-L}` is zeroed.
/// Deterministic for a given seed.
pub fn mask_augment(
    map: &SpatialTemporalMap,
    rng_seed: u64,
    p_mask: f64,
    len_range: (usize, usize),
) -> Result<SpatialTemporalMap> {
    let (lo, hi) = len_range;
    if !(0.0..=1.0).contains(&p_mask) {
        return Err(Error::Config(format!("mask probability {p_mask} not in [0, 1]")));
    }
    if lo == 0 || lo > hi || hi >= map.frames {
        return Err(Error::Config(format!(
            "mask length range ({lo}, {hi}) must satisfy 1 <= lo <= hi < T = {}",
            map.frames
        )));
    }
    let mut out = map.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    if rng.random::<f64>() < p_mask {
        let len = rng.random_range(lo..=hi);
        let start = rng.random_range(0..=map.frames - len);
        out.mask_run(start, len)?;
    }
    Ok(out)
}
