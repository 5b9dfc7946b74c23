//! Face video to spatial-temporal map: landmark smoothing, eye-aligned ROI,
//! skin segmentation, YUV conversion, block averaging, clip windows and
//! temporal masking augmentation.

mod color;
mod frames;
mod landmarks;
mod map;
mod roi;

pub use color::{rgb_to_yuv, PixelMask, SkinRule, SkinSegmenter};
pub use frames::{ColorSpace, FrameSequence};
pub use landmarks::{
    smooth_landmarks, LandmarkLayout, LandmarkTrack, Landmarks, Point, DEFAULT_SMOOTH_WINDOW,
    NUM_LANDMARKS,
};
pub use map::{
    build_stmap, build_stmap_raw, mask_augment, sliding_clips, Clip, Grid, MapColor,
    SpatialTemporalMap, StmapOptions, DEFAULT_GRID, DEFAULT_MASK_LEN, DEFAULT_MASK_PROB,
    DEFAULT_STRIDE, DEFAULT_WINDOW,
};
pub use roi::{compute_roi, RoiBox};

use crate::error::Result;

/// Skin mask of one frame: true for ROI pixels accepted by the segmenter.
/// Returned as a full-frame mask.
pub fn skin_mask(
    seq: &FrameSequence,
    t: usize,
    roi: &RoiBox,
    segmenter: &SkinSegmenter,
) -> PixelMask {
    let (w, h) = (seq.width(), seq.height());
    let mut bits = vec![false; w * h];
    let (x0, x1, y0, y1) = roi.pixel_bounds(w, h);
    for y in y0..y1 {
        for x in x0..x1 {
            let (u, v) = roi.to_box(Point::new(x as f64 + 0.5, y as f64 + 0.5));
            if !(u >= 0.0 && u < roi.width() && v >= 0.0 && v < roi.height()) {
                continue;
            }
            let px = seq.pixel(t, x, y);
            bits[y * w + x] = match (segmenter, seq.color()) {
                (SkinSegmenter::External(m), _) => m.get(x, y),
                (_, ColorSpace::Gray) | (SkinSegmenter::All, _) => true,
                (s, ColorSpace::Rgb) => s
                    .rule()
                    .expect("chroma segmenter")
                    .is_skin(px[0] as f64, px[1] as f64, px[2] as f64),
            };
        }
    }
    PixelMask {
        width: w,
        height: h,
        bits,
    }
}

/// Maps for every sliding-window clip of a video: landmarks are smoothed,
/// the raw map is built once, then each clip is cut out and normalized on
/// its own.
pub fn clip_maps(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    opts: &StmapOptions,
    smooth_window: usize,
    window: usize,
    stride: usize,
) -> Result<Vec<(Clip, SpatialTemporalMap)>> {
    let clips = sliding_clips(seq.len(), window, stride)?;
    let smoothed = smooth_landmarks(track, smooth_window)?;
    let raw = build_stmap_raw(seq, &smoothed, opts)?;
    clips
        .into_iter()
        .map(|clip| Ok((clip, raw.slice(clip.start, clip.end)?.normalized())))
        .collect()
}
