//! Synthetic data with known ground truth: BVP waveforms, rendered pulsatile
//! face videos with landmarks, directly synthesized spatial-temporal maps,
//! plus the degradation operators and the compression study built on them.

mod degrade;
mod study;

pub use degrade::{degrade, degrade_with_landmarks, DegradeOp};
pub use study::{compression_study, StudyRow, StudyTable};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{stream, stream_rng};
use crate::signal::PulseTrace;
use crate::stmap::{
    rgb_to_yuv, ColorSpace, FrameSequence, Grid, LandmarkTrack, Landmarks, Point,
    SpatialTemporalMap, NUM_LANDMARKS,
};

/// Pulsatile AC/DC amplitude.
pub const PULSE_AMPLITUDE: f64 = 0.02;
pub const DEFAULT_HR_RANGE: (f64, f64) = (47.0, 146.0);
pub const DEFAULT_BASE_RANGE: (f64, f64) = (60.0, 212.0);

/// Skin tone in RGB, scaled so its luma equals the base intensity.
const SKIN_RGB: [f64; 3] = [200.0, 150.0, 120.0];
const EYE_RGB: [f64; 3] = [40.0, 30.0, 30.0];
const BACKGROUND: f64 = 100.0;
const HARMONIC: f64 = 0.3;
/// Face ellipse semi-axes as fractions of the frame width and height.
const FACE_AX: f64 = 0.3;
const FACE_AY: f64 = 0.4;
const EYE_CENTER: (f64, f64) = (0.4, -0.25);
const EYE_RADII: (f64, f64) = (0.12, 0.06);
/// Jitter frequencies of x, y and roll (Hz).
const MOTION_HZ: [f64; 3] = [0.31, 0.23, 0.17];
const BLOCK_GAIN_JITTER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IllumDrift {
    pub freq_hz: f64,
    pub rel_amp: f64,
}

/// Sudden global illumination change by `rel_change` at `time_sec`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IllumStep {
    pub time_sec: f64,
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub hr_bpm: f64,
    pub duration_sec: f64,
    pub fps: f64,
    /// Pulsatile strength per channel (R, G, B), relative to the gray level.
    pub pulse_strength: [f64; 3],
    /// Mean gray level of the skin.
    pub base_intensity: f64,
    pub motion_amp_px: f64,
    pub illum_drift: IllumDrift,
    pub illum_step: Option<IllumStep>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub color: ColorSpace,
    pub hr_range: (f64, f64),
    pub base_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            hr_bpm: 72.0,
            duration_sec: 20.0,
            fps: 30.0,
            pulse_strength: [0.7, 1.0, 0.5],
            base_intensity: 128.0,
            motion_amp_px: 0.0,
            illum_drift: IllumDrift::default(),
            illum_step: None,
            noise_sigma: 0.0,
            seed: 0,
            width: 72,
            height: 72,
            color: ColorSpace::Rgb,
            hr_range: DEFAULT_HR_RANGE,
            base_range: DEFAULT_BASE_RANGE,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hr_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("invalid HR range ({lo}, {hi})")));
        }
        if !(self.hr_bpm >= lo && self.hr_bpm <= hi) {
            return Err(Error::Config(format!(
                "hr_bpm {} outside generator band [{lo}, {hi}]",
                self.hr_bpm
            )));
        }
        if !(self.fps.is_finite() && self.fps > 2.0 * self.hr_bpm / 60.0) {
            return Err(Error::Config(format!(
                "fps {} too low for {} bpm",
                self.fps, self.hr_bpm
            )));
        }
        if self.frames() < 2 {
            return Err(Error::Config(format!(
                "duration {} s gives fewer than 2 frames",
                self.duration_sec
            )));
        }
        if !(self.base_intensity > 0.0 && self.base_intensity.is_finite()) {
            return Err(Error::Config("base_intensity must be positive".into()));
        }
        let (blo, bhi) = self.base_range;
        if !(blo > 0.0 && blo <= bhi) {
            return Err(Error::Config(format!("invalid base range ({blo}, {bhi})")));
        }
        let nonneg = [
            ("noise_sigma", self.noise_sigma),
            ("motion_amp_px", self.motion_amp_px),
            ("illum_drift.rel_amp", self.illum_drift.rel_amp),
            ("illum_drift.freq_hz", self.illum_drift.freq_hz),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.illum_drift.rel_amp >= 1.0 {
            return Err(Error::Config("illumination drift amplitude must be < 1".into()));
        }
        if let Some(step) = self.illum_step {
            if !(step.rel_change > -1.0 && step.time_sec.is_finite()) {
                return Err(Error::Config("illumination step must keep light positive".into()));
            }
        }
        if self.pulse_strength.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("pulse strengths must be finite".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config(format!(
                "frame size {}x{} below 16x16",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_sec * self.fps).round().max(0.0) as usize
    }

    fn illumination(&self, t_sec: f64, phase: f64) -> f64 {
        let d = &self.illum_drift;
        let mut l = 1.0 + d.rel_amp * (2.0 * PI * d.freq_hz * t_sec + phase).sin();
        if let Some(step) = self.illum_step {
            if t_sec >= step.time_sec {
                l *= 1.0 + step.rel_change;
            }
        }
        l
    }
}

/// Copy of `template` with HR and base intensity drawn uniformly from its
/// ranges and the seed set to `seed`.
pub fn sample_config(template: &SynthConfig, seed: u64) -> SynthConfig {
    let mut rng = stream_rng(seed, stream::SAMPLE_CONFIG, 0);
    let (lo, hi) = template.hr_range;
    let (blo, bhi) = template.base_range;
    SynthConfig {
        hr_bpm: lo + (hi - lo) * rng.random::<f64>(),
        base_intensity: blo + (bhi - blo) * rng.random::<f64>(),
        seed,
        ..template.clone()
    }
}

/// Template of the noisy benchmark suite: 20 s clips with 3 px jitter,
/// pixel noise σ = 2 and a 10 % illumination drift at 0.2 Hz.
pub fn suite_template() -> SynthConfig {
    SynthConfig {
        motion_amp_px: 3.0,
        noise_sigma: 2.0,
        illum_drift: IllumDrift {
            freq_hz: 0.2,
            rel_amp: 0.1,
        },
        ..SynthConfig::default()
    }
}

/// `n` configurations sampled from [`suite_template`] with seeds `0..n`.
pub fn default_suite(n: usize) -> Vec<SynthConfig> {
    let tpl = suite_template();
    (0..n as u64).map(|s| sample_config(&tpl, s)).collect()
}

fn bvp_phase(seed: u64) -> f64 {
    2.0 * PI * stream_rng(seed, stream::BVP_PHASE, 0).random::<f64>()
}

/// Unit-RMS pulse value at `t_sec`: fundamental plus a second harmonic of
/// relative amplitude 0.3 and phase `phase`.
fn bvp_value(f_hz: f64, phase: f64, t_sec: f64) -> f64 {
    let norm = ((1.0 + HARMONIC * HARMONIC) / 2.0).sqrt();
    ((2.0 * PI * f_hz * t_sec).sin() + HARMONIC * (4.0 * PI * f_hz * t_sec + phase).sin()) / norm
}

/// Ground-truth BVP sampled at the frame times.
pub fn gen_bvp(cfg: &SynthConfig) -> Result<PulseTrace> {
    cfg.validate()?;
    let f = cfg.hr_bpm / 60.0;
    let phase = bvp_phase(cfg.seed);
    let samples = (0..cfg.frames())
        .map(|i| bvp_value(f, phase, i as f64 / cfg.fps))
        .collect();
    PulseTrace::new(samples, cfg.fps)
}

/// Face-normalized landmark positions: `u` in units of the horizontal
/// semi-axis, `v` of the vertical one, origin at the face center, `v` down.
pub fn face_template() -> [(f64, f64); NUM_LANDMARKS] {
    let mut p = [(0.0, 0.0); NUM_LANDMARKS];
    for k in 0..17 {
        let a = k as f64 * PI / 16.0;
        p[k] = (-0.98 * a.cos(), 0.98 * a.sin());
    }
    for k in 0..5 {
        let s = k as f64 / 4.0;
        p[17 + k] = (-0.6 + 0.4 * s, -0.45);
        p[22 + k] = (0.2 + 0.4 * s, -0.45);
    }
    for k in 0..4 {
        p[27 + k] = (0.0, -0.2 + 0.35 * k as f64 / 3.0);
    }
    for k in 0..5 {
        p[31 + k] = (-0.15 + 0.075 * k as f64, 0.22);
    }
    let (ex, ey) = EYE_CENTER;
    let (rx, ry) = EYE_RADII;
    for k in 0..6 {
        let a = k as f64 * PI / 3.0;
        p[36 + k] = (-ex + rx * a.cos(), ey + ry * a.sin());
        p[42 + k] = (ex + rx * a.cos(), ey + ry * a.sin());
    }
    for k in 0..12 {
        let a = k as f64 * PI / 6.0;
        p[48 + k] = (0.3 * a.cos(), 0.55 + 0.1 * a.sin());
    }
    for k in 0..8 {
        let a = k as f64 * PI / 4.0;
        p[60 + k] = (0.2 * a.cos(), 0.55 + 0.05 * a.sin());
    }
    p[68] = (-ex, ey);
    p[69] = (ex, ey);
    for k in 0..11 {
        let u = -0.7 + 0.14 * k as f64;
        p[70 + k] = (u, -0.75 + 0.15 * (u / 0.7).powi(2));
    }
    p
}

/// Face center and roll at one instant.
#[derive(Debug, Clone, Copy)]
struct Pose {
    cx: f64,
    cy: f64,
    roll: f64,
}

struct Scene {
    ax: f64,
    ay: f64,
    cx: f64,
    cy: f64,
    amp: f64,
    motion_phase: [f64; 3],
    illum_phase: f64,
    bvp_phase: f64,
}

impl Scene {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = stream_rng(cfg.seed, stream::MOTION, 0);
        let motion_phase = [0; 3].map(|_| 2.0 * PI * rng.random::<f64>());
        let illum_phase = 2.0 * PI * stream_rng(cfg.seed, stream::ILLUM, 0).random::<f64>();
        Self {
            ax: FACE_AX * cfg.width as f64,
            ay: FACE_AY * cfg.height as f64,
            cx: cfg.width as f64 / 2.0,
            cy: cfg.height as f64 / 2.0,
            amp: cfg.motion_amp_px,
            motion_phase,
            illum_phase,
            bvp_phase: bvp_phase(cfg.seed),
        }
    }

    fn pose(&self, t_sec: f64) -> Pose {
        let w = |k: usize| (2.0 * PI * MOTION_HZ[k] * t_sec + self.motion_phase[k]).sin();
        Pose {
            cx: self.cx + self.amp * w(0),
            cy: self.cy + self.amp * w(1),
            // roll that moves the face outline by about `amp` pixels
            roll: self.amp / self.ay * w(2),
        }
    }

    fn landmarks(&self, pose: Pose, template: &[(f64, f64); NUM_LANDMARKS]) -> Landmarks {
        let (s, c) = pose.roll.sin_cos();
        template.map(|(u, v)| {
            let (x, y) = (u * self.ax, v * self.ay);
            Point::new(pose.cx + c * x - s * y, pose.cy + s * x + c * y)
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Skin,
    Eye,
    Background,
}

fn region(u: f64, v: f64) -> Region {
    if u * u + v * v > 1.0 {
        return Region::Background;
    }
    let (ex, ey) = EYE_CENTER;
    let (rx, ry) = EYE_RADII;
    let dv = ((v - ey) / ry).powi(2);
    if ((u + ex) / rx).powi(2) + dv <= 1.0 || ((u - ex) / rx).powi(2) + dv <= 1.0 {
        Region::Eye
    } else {
        Region::Skin
    }
}

fn luma(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Skin color per channel for gray level `base` with pulse value `p`.
fn skin_color(cfg: &SynthConfig, base: f64, p: f64) -> [f64; 3] {
    let l = luma(SKIN_RGB);
    let s = cfg.pulse_strength;
    [0, 1, 2].map(|c| base * (SKIN_RGB[c] / l + s[c] * PULSE_AMPLITUDE * p))
}

/// Renders a pulsatile face video. Returns frames, the landmark track that
/// follows the rendered face, and the ground-truth BVP.
pub fn gen_video(cfg: &SynthConfig) -> Result<(FrameSequence, LandmarkTrack, PulseTrace)> {
    gen_video_with(cfg, Exec::default())
}

pub fn gen_video_with(
    cfg: &SynthConfig,
    exec: Exec,
) -> Result<(FrameSequence, LandmarkTrack, PulseTrace)> {
    let bvp = gen_bvp(cfg)?;
    let scene = Scene::new(cfg);
    let template = face_template();
    let (w, h) = (cfg.width, cfg.height);
    let ch = cfg.color.channels();
    let n = cfg.frames();
    let f_hz = cfg.hr_bpm / 60.0;

    let render = |t: usize| -> (Vec<f32>, Landmarks) {
        let ts = t as f64 / cfg.fps;
        let pose = scene.pose(ts);
        let light = cfg.illumination(ts, scene.illum_phase);
        let p = bvp_value(f_hz, scene.bvp_phase, ts);
        let skin = skin_color(cfg, cfg.base_intensity, p);
        let gray = |rgb: [f64; 3]| [luma(rgb); 3];
        let (skin, eye, bg) = match cfg.color {
            ColorSpace::Rgb => (skin, EYE_RGB, [BACKGROUND; 3]),
            ColorSpace::Gray => {
                let g = cfg.base_intensity * (1.0 + cfg.pulse_strength[1] * PULSE_AMPLITUDE * p);
                ([g; 3], gray(EYE_RGB), [BACKGROUND; 3])
            }
        };
        let mut rng = stream_rng(cfg.seed, stream::PIXEL_NOISE, t as u64);
        let (s, c) = pose.roll.sin_cos();
        let mut frame = Vec::with_capacity(w * h * ch);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 + 0.5 - pose.cx;
                let dy = y as f64 + 0.5 - pose.cy;
                let u = (c * dx + s * dy) / scene.ax;
                let v = (-s * dx + c * dy) / scene.ay;
                let color = match region(u, v) {
                    Region::Skin => &skin,
                    Region::Eye => &eye,
                    Region::Background => &bg,
                };
                for k in 0..ch {
                    let noise = if cfg.noise_sigma > 0.0 {
                        cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    frame.push((color[k] * light + noise) as f32);
                }
            }
        }
        (frame, scene.landmarks(pose, &template))
    };

    let (frames, points): (Vec<_>, Vec<_>) = exec.map(n, render).into_iter().unzip();
    let seq = FrameSequence::new(w, h, cfg.color, cfg.fps, frames)?;
    let track = LandmarkTrack::new(points, vec![true; n])?;
    Ok((seq, track, bvp))
}

/// Spatial-temporal map synthesized directly from the pulse model, skipping
/// rendering: every block carries the skin color modulated by the BVP with a
/// per-block gain jitter and additive noise, converted to YUV (or gray) and
/// normalized. Returns the map and its HR label.
pub fn gen_synth_map(cfg: &SynthConfig, grid: Grid) -> Result<(SpatialTemporalMap, f64)> {
    cfg.validate()?;
    if grid.blocks() == 0 {
        return Err(Error::Config("grid must have at least one block".into()));
    }
    let n = cfg.frames();
    let f_hz = cfg.hr_bpm / 60.0;
    let bvp_phase = bvp_phase(cfg.seed);
    let illum_phase = 2.0 * PI * stream_rng(cfg.seed, stream::ILLUM, 0).random::<f64>();
    let ch = cfg.color.channels();
    let mut values = Vec::with_capacity(grid.blocks() * n * ch);
    for b in 0..grid.blocks() {
        let gain = 1.0
            + BLOCK_GAIN_JITTER
                * (2.0 * stream_rng(cfg.seed, stream::BLOCK_GAIN, b as u64).random::<f64>() - 1.0);
        let mut rng = stream_rng(cfg.seed, stream::BLOCK_NOISE, b as u64);
        for t in 0..n {
            let ts = t as f64 / cfg.fps;
            let p = gain * bvp_value(f_hz, bvp_phase, ts);
            let light = cfg.illumination(ts, illum_phase);
            let mut noisy = |v: f64| {
                let e = if cfg.noise_sigma > 0.0 {
                    cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                v * light + e
            };
            match cfg.color {
                ColorSpace::Rgb => {
                    let rgb = skin_color(cfg, cfg.base_intensity, p).map(&mut noisy);
                    values.extend(rgb_to_yuv(rgb[0], rgb[1], rgb[2]));
                }
                ColorSpace::Gray => {
                    let g = cfg.base_intensity * (1.0 + cfg.pulse_strength[1] * PULSE_AMPLITUDE * p);
                    values.push(noisy(g));
                }
            }
        }
    }
    let map = SpatialTemporalMap::new(grid.blocks(), n, ch, cfg.fps, values, vec![false; n])?;
    Ok((map.normalized(), cfg.hr_bpm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::{chrom_hr, extract_rgb_trace, green_hr, pos_hr, RgbTrace};
    use crate::signal::{spectral_hr, BandConfig};
    use crate::stmap::{compute_roi, LandmarkLayout, StmapOptions};

    fn band() -> BandConfig {
        BandConfig::default()
    }

    fn clean(hr: f64) -> SynthConfig {
        SynthConfig {
            hr_bpm: hr,
            ..SynthConfig::default()
        }
    }

    /// Plain DFT magnitude at `k` cycles over the record.
    fn dft_mag(x: &[f64], k: usize) -> f64 {
        let n = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * PI * k as f64 * i as f64 / n;
            re += v * a.cos();
            im -= v * a.sin();
        }
        re.hypot(im)
    }

    #[test]
    fn bvp_peak_at_one_hertz() {
        let cfg = SynthConfig {
            hr_bpm: 60.0,
            duration_sec: 10.0,
            ..SynthConfig::default()
        };
        let bvp = gen_bvp(&cfg).unwrap();
        let x = bvp.samples();
        assert_eq!(x.len(), 300);
        // 10 s record: bin k is k/10 Hz
        let best = (1..150).max_by(|&a, &b| dft_mag(x, a).total_cmp(&dft_mag(x, b))).unwrap();
        assert_eq!(best, 10);
    }

    #[test]
    fn bvp_is_unit_rms() {
        for seed in 0..5 {
            let cfg = SynthConfig {
                hr_bpm: 60.0,
                duration_sec: 10.0,
                seed,
                ..SynthConfig::default()
            };
            let x = gen_bvp(&cfg).unwrap().into_samples();
            let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
            assert!((rms - 1.0).abs() < 1e-9, "rms {rms}");
        }
    }

    #[test]
    fn bvp_rate_recovered_across_range() {
        for hr in [47.0, 90.0, 146.0] {
            let bvp = gen_bvp(&clean(hr)).unwrap();
            let est = spectral_hr(&bvp, &band()).unwrap().bpm;
            assert!((est - hr).abs() <= 0.5, "{hr}: {est}");
        }
    }

    #[test]
    fn seeds_change_only_harmonic_phase() {
        let a = gen_bvp(&SynthConfig { seed: 1, ..clean(80.0) }).unwrap();
        let b = gen_bvp(&SynthConfig { seed: 2, ..clean(80.0) }).unwrap();
        assert_ne!(a.samples(), b.samples());
        // the fundamental is seed-free: a - b is a pure second harmonic
        let f = 80.0 / 60.0;
        let norm = ((1.0 + HARMONIC * HARMONIC) / 2.0).sqrt();
        let d: Vec<f64> = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y) * norm).collect();
        let (pa, pb) = (bvp_phase(1), bvp_phase(2));
        for (i, v) in d.iter().enumerate() {
            let t = i as f64 / 30.0;
            let want = HARMONIC * ((4.0 * PI * f * t + pa).sin() - (4.0 * PI * f * t + pb).sin());
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(gen_bvp(&clean(150.0)).is_err());
        assert!(gen_bvp(&SynthConfig { fps: 2.0, ..clean(72.0) }).is_err());
        assert!(gen_bvp(&SynthConfig { duration_sec: 0.0, ..clean(72.0) }).is_err());
        assert!(gen_bvp(&SynthConfig { noise_sigma: -1.0, ..clean(72.0) }).is_err());
    }

    #[test]
    fn video_is_reproducible_and_policy_free() {
        let cfg = SynthConfig {
            duration_sec: 2.0,
            noise_sigma: 2.0,
            motion_amp_px: 3.0,
            seed: 7,
            ..SynthConfig::default()
        };
        let (a, la, _) = gen_video_with(&cfg, Exec::Sequential).unwrap();
        let (b, lb, _) = gen_video_with(&cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _, _) = gen_video(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.frames(), c.frames());
    }

    #[test]
    fn clean_video_chrom_and_pos() {
        let (seq, track, _) = gen_video(&clean(72.0)).unwrap();
        let trace = extract_rgb_trace(&seq, &track, &StmapOptions::default()).unwrap();
        let c = chrom_hr(&trace, &band()).unwrap().bpm;
        let p = pos_hr(&trace, &band(), 1.6).unwrap().bpm;
        assert!((c - 72.0).abs() <= 1.0, "chrom {c}");
        assert!((p - 72.0).abs() <= 1.0, "pos {p}");
    }

    #[test]
    fn flicker_cancelled_by_chrom() {
        let cfg = SynthConfig {
            illum_drift: IllumDrift {
                freq_hz: 0.2,
                rel_amp: 0.1,
            },
            ..clean(72.0)
        };
        let (seq, track, _) = gen_video(&cfg).unwrap();
        let trace = extract_rgb_trace(&seq, &track, &StmapOptions::default()).unwrap();
        let c = chrom_hr(&trace, &band()).unwrap().bpm;
        assert!((c - 72.0).abs() <= 1.0, "chrom {c}");
    }

    #[test]
    fn illumination_step_tolerated_by_pos() {
        let cfg = SynthConfig {
            illum_step: Some(IllumStep {
                time_sec: 10.0,
                rel_change: 0.3,
            }),
            ..clean(72.0)
        };
        let (seq, track, _) = gen_video(&cfg).unwrap();
        let trace = extract_rgb_trace(&seq, &track, &StmapOptions::default()).unwrap();
        let p = pos_hr(&trace, &band(), 1.6).unwrap().bpm;
        assert!((p - 72.0).abs() <= 2.0, "pos {p}");
    }

    #[test]
    fn gray_video_has_one_channel() {
        let cfg = SynthConfig {
            color: ColorSpace::Gray,
            noise_sigma: 2.0,
            ..clean(84.0)
        };
        let (seq, track, _) = gen_video(&cfg).unwrap();
        assert_eq!(seq.channels(), 1);
        let opts = StmapOptions {
            grid: Grid::new(1, 1),
            ..StmapOptions::default()
        };
        let map = crate::stmap::build_stmap_raw(&seq, &track, &opts).unwrap();
        assert_eq!(map.channels(), 1);
        let g = map.row(0, 0);
        let trace = RgbTrace::new(g.clone(), g.clone(), g, seq.frame_rate_hz()).unwrap();
        let est = green_hr(&trace, &band()).unwrap().bpm;
        assert!((est - 84.0).abs() <= 2.0, "gray {est}");
    }

    #[test]
    fn landmarks_follow_rendered_face() {
        let cfg = SynthConfig {
            motion_amp_px: 3.0,
            duration_sec: 4.0,
            width: 96,
            height: 96,
            seed: 3,
            ..SynthConfig::default()
        };
        let (seq, track, _) = gen_video(&cfg).unwrap();
        let layout = LandmarkLayout::default();
        for t in (0..seq.len()).step_by(7) {
            // centroid of the non-background pixels is the ellipse center
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
            for y in 0..seq.height() {
                for x in 0..seq.width() {
                    if seq.pixel(t, x, y)[0] as f64 != BACKGROUND {
                        sx += x as f64 + 0.5;
                        sy += y as f64 + 0.5;
                        n += 1.0;
                    }
                }
            }
            let p = track.points(t);
            let mid = p[0].lerp(p[16], 0.5);
            assert!((sx / n - mid.x).abs() < 1.0 && (sy / n - mid.y).abs() < 1.0, "frame {t}");
            // the ROI derived from the landmarks sits on the same face
            let roi = compute_roi(p, &layout).unwrap();
            let (u, v) = roi.to_box(Point::new(sx / n, sy / n));
            assert!((u - roi.width() / 2.0).abs() < 1.0, "frame {t}: u {u}");
            assert!(v > 0.0 && v < roi.height());
        }
    }

    #[test]
    fn synth_map_rows_carry_rate() {
        for hr in [55.0, 100.0, 140.0] {
            let (map, label) = gen_synth_map(&clean(hr), Grid::new(5, 5)).unwrap();
            assert_eq!(label, hr);
            assert_eq!((map.blocks(), map.frames(), map.channels()), (25, 600, 3));
            for b in 0..25 {
                let row = PulseTrace::new(map.row(b, 0), 30.0).unwrap();
                let est = spectral_hr(&row, &band()).unwrap().bpm;
                assert!((est - hr).abs() <= 1.0, "{hr} block {b}: {est}");
            }
        }
    }

    #[test]
    fn synth_map_deterministic() {
        let cfg = SynthConfig {
            noise_sigma: 1.0,
            seed: 11,
            ..SynthConfig::default()
        };
        let a = gen_synth_map(&cfg, Grid::new(5, 5)).unwrap();
        let b = gen_synth_map(&cfg, Grid::new(5, 5)).unwrap();
        let bits = |m: &SpatialTemporalMap| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0), bits(&b.0));
    }

    #[test]
    fn gray_synth_map_single_channel() {
        let cfg = SynthConfig {
            color: ColorSpace::Gray,
            ..SynthConfig::default()
        };
        let (map, _) = gen_synth_map(&cfg, Grid::new(2, 2)).unwrap();
        assert_eq!(map.channels(), 1);
    }

    #[test]
    fn sampled_labels_roughly_uniform() {
        let tpl = SynthConfig::default();
        let mut counts = [0usize; 10];
        let n = 1000;
        for s in 0..n {
            let c = sample_config(&tpl, s);
            assert!(c.validate().is_ok());
            assert!((60.0..=212.0).contains(&c.base_intensity));
            let k = (((c.hr_bpm - 47.0) / 99.0 * 10.0) as usize).min(9);
            counts[k] += 1;
        }
        let e = n as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99th percentile of chi-square with 9 degrees of freedom
        assert!(chi2 < 21.666, "chi2 {chi2} counts {counts:?}");
    }

    #[test]
    fn synthetic_skin_passes_skin_rule() {
        let rule = crate::stmap::SkinRule::default();
        for base in [60.0, 128.0, 212.0] {
            let c = skin_color(&SynthConfig::default(), base, 0.0);
            assert!(rule.is_skin(c[0], c[1], c[2]), "base {base}");
            assert!((luma(c) - base).abs() < 1e-9);
        }
        assert!(!rule.is_skin(BACKGROUND, BACKGROUND, BACKGROUND));
        assert!(!rule.is_skin(EYE_RGB[0], EYE_RGB[1], EYE_RGB[2]));
    }
}
