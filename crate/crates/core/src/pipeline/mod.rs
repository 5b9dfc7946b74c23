//! Pipeline configuration and the end-to-end steps behind the command-line
//! tool: video to clip maps, HR estimation, synthetic data and training.

mod config;
mod mapset;

pub use config::{ColorMode, Method, PipelineConfig, PipelinePaths, StudySettings};
pub use mapset::{labelled_samples, read_map_set, write_map_set, MapEntry, INDEX_FILE};

use std::path::Path;

use crate::classic::{extract_rgb_trace, fill_gaps, RgbTrace};
use crate::error::{Error, Result};
use crate::formats::{read_landmarks_csv, read_video, PredictionRow};
use crate::nnet::{train, Dataset, Model, Sample, TrainData, TrainLog, TrainStagePlan};
use crate::rng::mix;
use crate::stmap::{
    build_stmap_raw, clip_maps, rgb_to_yuv, smooth_landmarks, sliding_clips, Clip, ColorSpace,
    FrameSequence, Grid, LandmarkTrack, MapColor, SpatialTemporalMap, StmapOptions,
};
use crate::synth::{gen_synth_map, sample_config, SynthConfig};

/// Reads landmarks first, then frames; nothing is written either way.
pub fn load_video(frames: &Path, landmarks: &Path, fps: f64) -> Result<(FrameSequence, LandmarkTrack)> {
    let track = read_landmarks_csv(landmarks)?;
    let seq = read_video(frames, fps)?;
    track.check_against(seq.len(), seq.width(), seq.height())?;
    Ok((seq, track))
}

/// Luma (the Y of the YUV transform) of color frames; gray frames are
/// returned unchanged.
pub fn to_luma(seq: &FrameSequence) -> Result<FrameSequence> {
    if seq.color() == ColorSpace::Gray {
        return Ok(seq.clone());
    }
    let frames = seq
        .frames()
        .iter()
        .map(|f| {
            f.chunks_exact(3)
                .map(|p| rgb_to_yuv(p[0] as f64, p[1] as f64, p[2] as f64)[0] as f32)
                .collect()
        })
        .collect();
    FrameSequence::new(seq.width(), seq.height(), ColorSpace::Gray, seq.frame_rate_hz(), frames)
}

fn apply_color(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<Option<FrameSequence>> {
    match (cfg.color, seq.color()) {
        (ColorMode::RawGray, ColorSpace::Rgb) => to_luma(seq).map(Some),
        _ => Ok(None),
    }
}

/// Normalized map of every sliding-window clip.
pub fn video_clip_maps(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    cfg: &PipelineConfig,
) -> Result<Vec<(Clip, SpatialTemporalMap)>> {
    let converted = apply_color(seq, cfg)?;
    let seq = converted.as_ref().unwrap_or(seq);
    clip_maps(
        seq,
        track,
        &cfg.stmap_options(),
        cfg.smooth_window,
        cfg.window_frames,
        cfg.stride_frames,
    )
}

pub fn video_map_set(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    cfg: &PipelineConfig,
    video_id: &str,
    hr_bpm: Option<f64>,
) -> Result<Vec<MapEntry>> {
    Ok(video_clip_maps(seq, track, cfg)?
        .into_iter()
        .enumerate()
        .map(|(k, (clip, map))| MapEntry::new(video_id, k, clip.start, hr_bpm, map))
        .collect())
}

/// Whole-video skin trace; a gray video gives the same series in all three
/// channels (usable by GREEN only).
fn skin_trace(seq: &FrameSequence, track: &LandmarkTrack, opts: &StmapOptions) -> Result<RgbTrace> {
    if seq.color() == ColorSpace::Rgb {
        return extract_rgb_trace(seq, track, opts);
    }
    let opts = StmapOptions {
        grid: Grid::new(1, 1),
        color: MapColor::Rgb,
        ..opts.clone()
    };
    let map = build_stmap_raw(seq, track, &opts)?;
    let mut v = map.row(0, 0);
    fill_gaps(&mut v, map.mask());
    RgbTrace::new(v.clone(), v.clone(), v, seq.frame_rate_hz())
}

fn video_rows(video_id: &str, clips: &[Clip], hrs: &[f64]) -> Vec<PredictionRow> {
    let mut rows: Vec<PredictionRow> = clips
        .iter()
        .zip(hrs)
        .enumerate()
        .map(|(k, (c, &hr))| PredictionRow::clip(video_id, k, c.start, hr))
        .collect();
    rows.push(PredictionRow::video(video_id, hrs.iter().sum::<f64>() / hrs.len() as f64));
    rows
}

/// Per-clip HR of every sliding-window clip plus the video HR (mean of the
/// clips) with the configured method. `cnn` needs `model`.
pub fn estimate_video(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    cfg: &PipelineConfig,
    model: Option<&Model>,
    video_id: &str,
) -> Result<Vec<PredictionRow>> {
    match cfg.method.classic() {
        Some(method) => {
            if seq.color() == ColorSpace::Gray && method != crate::classic::ClassicMethod::Green {
                return Err(Error::Shape(format!(
                    "{} needs color video; this video has one channel",
                    method.name()
                )));
            }
            let clips = sliding_clips(seq.len(), cfg.window_frames, cfg.stride_frames)?;
            let smoothed = smooth_landmarks(track, cfg.smooth_window)?;
            let trace = skin_trace(seq, &smoothed, &cfg.stmap_options())?;
            let hrs = clips
                .iter()
                .map(|c| Ok(method.estimate(&trace.slice(c.start, c.end)?, &cfg.band)?.bpm))
                .collect::<Result<Vec<_>>>()?;
            Ok(video_rows(video_id, &clips, &hrs))
        }
        None => {
            let model = model.ok_or_else(|| Error::Config("method cnn needs a checkpoint".into()))?;
            let maps = video_clip_maps(seq, track, cfg)?;
            let hrs = maps
                .iter()
                .map(|(_, m)| model.predict_hr(m))
                .collect::<Result<Vec<_>>>()?;
            let clips: Vec<Clip> = maps.iter().map(|(c, _)| *c).collect();
            Ok(video_rows(video_id, &clips, &hrs))
        }
    }
}

/// CNN predictions for stored maps, grouped by video in order of first
/// appearance.
pub fn estimate_maps(entries: &[MapEntry], model: &Model) -> Result<Vec<PredictionRow>> {
    let mut videos: Vec<&str> = Vec::new();
    for e in entries {
        if !videos.contains(&e.video_id.as_str()) {
            videos.push(&e.video_id);
        }
    }
    let mut rows = Vec::new();
    for v in videos {
        let mine: Vec<&MapEntry> = entries.iter().filter(|e| e.video_id == v).collect();
        let hrs = mine
            .iter()
            .map(|e| model.predict_hr(&e.map))
            .collect::<Result<Vec<_>>>()?;
        let clips: Vec<Clip> = mine
            .iter()
            .map(|e| Clip {
                start: e.start_frame,
                end: e.start_frame + e.map.frames(),
            })
            .collect();
        let mut r = video_rows(v, &clips, &hrs);
        for (row, e) in r.iter_mut().zip(&mine) {
            row.clip_index = Some(e.clip_index);
        }
        rows.extend(r);
    }
    Ok(rows)
}

/// Generator settings of item `index` of a seeded set: HR and base
/// intensity drawn from the template's ranges.
pub fn synth_item_config(template: &SynthConfig, seed: u64, index: u64) -> SynthConfig {
    sample_config(template, mix(seed, index))
}

/// `count` labelled synthetic maps, one per generated configuration.
pub fn synth_map_set(template: &SynthConfig, grid: Grid, count: usize, seed: u64) -> Result<Vec<MapEntry>> {
    (0..count as u64)
        .map(|i| {
            let (map, hr) = gen_synth_map(&synth_item_config(template, seed, i), grid)?;
            Ok(MapEntry::new(&format!("synth{i:05}"), 0, 0, Some(hr), map))
        })
        .collect()
}

/// The configured plan, or pretraining on synthetic maps followed by
/// fine-tuning when real maps are present (each for `train.epochs`).
pub fn default_plan(cfg: &PipelineConfig, have_synthetic: bool, have_real: bool) -> Result<TrainStagePlan> {
    if let Some(p) = &cfg.plan {
        return Ok(p.clone());
    }
    let e = cfg.train.epochs;
    match (have_synthetic, have_real) {
        (true, true) => Ok(TrainStagePlan::three_stage(e, e)),
        (true, false) => Ok(TrainStagePlan::single(Dataset::Synthetic, e)),
        (false, true) => Ok(TrainStagePlan::single(Dataset::Real, e)),
        (false, false) => Err(Error::Config("no training maps given".into())),
    }
}

pub fn train_model(
    cfg: &PipelineConfig,
    synthetic: &[Sample],
    real: &[Sample],
    validation: &[Sample],
) -> Result<(Model, TrainLog, TrainStagePlan)> {
    let plan = default_plan(cfg, !synthetic.is_empty(), !real.is_empty())?;
    let data = TrainData {
        synthetic,
        real,
        validation,
    };
    let (model, log) = train(&plan, &data, &cfg.regressor())?;
    Ok((model, log, plan))
}
