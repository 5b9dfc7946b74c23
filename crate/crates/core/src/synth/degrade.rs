//! Video degradations standing in for the codec/resolution study: area
//! downsampling, JPEG-style intra-frame DCT quantization and frame drops.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{stream, stream_rng};
use crate::stmap::{ColorSpace, FrameSequence, LandmarkTrack, Landmarks, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradeOp {
    Identity,
    /// Area-average downsample; frame size becomes `round(size * scale)`.
    Resize { scale: f64 },
    /// 8x8 block DCT with the standard quality-scaled JPEG tables.
    Quantize { quality: u8 },
    /// Each frame after the first is replaced by its predecessor with
    /// probability `p`.
    FrameDrop { p: f64, seed: u64 },
}

impl DegradeOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DegradeOp::Identity => Ok(()),
            DegradeOp::Resize { scale } if scale > 0.0 && scale <= 1.0 => Ok(()),
            DegradeOp::Resize { scale } => {
                Err(Error::Config(format!("resize scale {scale} not in (0, 1]")))
            }
            DegradeOp::Quantize { quality } if (1..=100).contains(&quality) => Ok(()),
            DegradeOp::Quantize { quality } => {
                Err(Error::Config(format!("quality {quality} not in [1, 100]")))
            }
            DegradeOp::FrameDrop { p, .. } if (0.0..=1.0).contains(&p) => Ok(()),
            DegradeOp::FrameDrop { p, .. } => {
                Err(Error::Config(format!("drop probability {p} not in [0, 1]")))
            }
        }
    }

    /// Short row label, e.g. `resize 0.667` or `quantize 10`.
    pub fn label(&self) -> String {
        match *self {
            DegradeOp::Identity => "identity".into(),
            DegradeOp::Resize { scale } => format!("resize {scale:.3}"),
            DegradeOp::Quantize { quality } => format!("quantize {quality}"),
            DegradeOp::FrameDrop { p, .. } => format!("frame_drop {p:.3}"),
        }
    }
}

/// `identity`, `resize:<scale>`, `quantize:<quality>` or
/// `frame_drop:<p>[:<seed>]`.
impl std::str::FromStr for DegradeOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse degradation `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad());
        let op = match (parts[0], parts.len()) {
            ("identity", 1) => DegradeOp::Identity,
            ("resize", 2) => DegradeOp::Resize { scale: num(1)? },
            ("quantize", 2) => DegradeOp::Quantize {
                quality: parts[1].parse().map_err(|_| bad())?,
            },
            ("frame_drop", 2 | 3) => DegradeOp::FrameDrop {
                p: num(1)?,
                seed: match parts.get(2) {
                    Some(v) => v.parse().map_err(|_| bad())?,
                    None => 0,
                },
            },
            _ => return Err(bad()),
        };
        op.validate()?;
        Ok(op)
    }
}

pub fn degrade(seq: &FrameSequence, op: &DegradeOp) -> Result<FrameSequence> {
    op.validate()?;
    match *op {
        DegradeOp::Identity => Ok(seq.clone()),
        DegradeOp::Resize { scale } => resize(seq, scale),
        DegradeOp::Quantize { quality } => quantize(seq, quality),
        DegradeOp::FrameDrop { p, seed } => {
            let src = drop_sources(seq.len(), p, seed);
            seq.with_frames(src.iter().map(|&s| seq.frame(s).to_vec()).collect())
        }
    }
}

/// Degrades frames and keeps the landmark track consistent with them:
/// resizing scales the points, frame drops repeat them.
pub fn degrade_with_landmarks(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    op: &DegradeOp,
) -> Result<(FrameSequence, LandmarkTrack)> {
    if track.len() != seq.len() {
        return Err(Error::InvalidInput(format!(
            "{} landmark frames for {} video frames",
            track.len(),
            seq.len()
        )));
    }
    let out = degrade(seq, op)?;
    let track = match *op {
        DegradeOp::Resize { .. } => {
            let kx = out.width() as f64 / seq.width() as f64;
            let ky = out.height() as f64 / seq.height() as f64;
            let points: Vec<Landmarks> = (0..track.len())
                .map(|t| track.points(t).map(|p| Point::new(p.x * kx, p.y * ky)))
                .collect();
            LandmarkTrack::new(points, track.validity().to_vec())?
        }
        DegradeOp::FrameDrop { p, seed } => {
            let src = drop_sources(seq.len(), p, seed);
            LandmarkTrack::new(
                src.iter().map(|&s| *track.points(s)).collect(),
                src.iter().map(|&s| track.is_valid(s)).collect(),
            )?
        }
        _ => track.clone(),
    };
    Ok((out, track))
}

/// Index of the source frame shown at each output position.
fn drop_sources(n: usize, p: f64, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, stream::FRAME_DROP, 0);
    let mut src = Vec::with_capacity(n);
    for t in 0..n {
        let dropped = t > 0 && rng.random::<f64>() < p;
        src.push(if dropped { src[t - 1] } else { t });
    }
    src
}

/// Overlap weights of each output cell `[i/k, (i+1)/k)` with the input grid.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let k = n_out as f64 / n_in as f64;
    (0..n_out)
        .map(|i| {
            let (a, b) = (i as f64 / k, (i + 1) as f64 / k);
            let mut w = Vec::new();
            for j in a.floor() as usize..(b.ceil() as usize).min(n_in) {
                let overlap = (b.min(j as f64 + 1.0) - a.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((j, overlap * k));
                }
            }
            w
        })
        .collect()
}

fn resize(seq: &FrameSequence, scale: f64) -> Result<FrameSequence> {
    let (w, h, ch) = (seq.width(), seq.height(), seq.channels());
    let ow = ((w as f64 * scale).round() as usize).max(1);
    let oh = ((h as f64 * scale).round() as usize).max(1);
    if ow == w && oh == h {
        return Ok(seq.clone());
    }
    let wx = area_weights(w, ow);
    let wy = area_weights(h, oh);
    let frames = Exec::default().map(seq.len(), |t| {
        let src = seq.frame(t);
        let mut rows = vec![0.0f64; h * ow * ch];
        for y in 0..h {
            for (ox, wts) in wx.iter().enumerate() {
                for &(x, wt) in wts {
                    for c in 0..ch {
                        rows[(y * ow + ox) * ch + c] += wt * src[(y * w + x) * ch + c] as f64;
                    }
                }
            }
        }
        let mut out = vec![0.0f32; oh * ow * ch];
        for (oy, wts) in wy.iter().enumerate() {
            for i in 0..ow * ch {
                let v: f64 = wts.iter().map(|&(y, wt)| wt * rows[y * ow * ch + i]).sum();
                out[oy * ow * ch + i] = v as f32;
            }
        }
        out
    });
    FrameSequence::new(ow, oh, seq.color(), seq.frame_rate_hz(), frames)
}

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69,
    56, 14, 17, 22, 29, 51, 87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104,
    113, 92, 49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99,
    99, 47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
];

/// Table scaled the way the IJG encoder maps quality to step sizes.
fn scaled_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as u32;
    let s = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|b| ((b as u32 * s + 50) / 100).clamp(1, 255) as f64)
}

/// Orthonormal 8-point DCT-II basis, `[u][x]`.
fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.25f64.sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Quantizes one 8x8 block in place: forward DCT, round to the table
/// steps, inverse DCT.
fn quantize_block(block: &mut [f64; 64], table: &[f64; 64]) {
    let m = dct_basis();
    let mut tmp = [0.0; 64];
    // rows then columns
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| m[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut coef = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let c: f64 = (0..8).map(|y| m[v][y] * tmp[y * 8 + u]).sum();
            let q = table[v * 8 + u];
            coef[v * 8 + u] = (c / q).round() * q;
        }
    }
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|v| m[v][y] * coef[v * 8 + u]).sum();
        }
    }
    for y in 0..8 {
        for x in 0..8 {
            block[y * 8 + x] = (0..8).map(|u| m[u][x] * tmp[y * 8 + u]).sum();
        }
    }
}

fn to_ycbcr(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0,
        0.5 * r - 0.418688 * g - 0.081312 * b + 128.0,
    ]
}

fn from_ycbcr(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let (cb, cr) = (cb - 128.0, cr - 128.0);
    [
        y + 1.402 * cr,
        y - 0.344136 * cb - 0.714136 * cr,
        y + 1.772 * cb,
    ]
}

fn to_u8_level(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0)
}

/// Intra-frame JPEG-style compression (4:4:4, no entropy coding). Input and
/// output are 8-bit levels; edge blocks are padded by edge replication.
fn quantize(seq: &FrameSequence, quality: u8) -> Result<FrameSequence> {
    let (w, h) = (seq.width(), seq.height());
    let luma = scaled_table(&LUMA_TABLE, quality);
    let chroma = scaled_table(&CHROMA_TABLE, quality);
    let planes_of = |frame: &[f32]| -> Vec<Vec<f64>> {
        match seq.color() {
            ColorSpace::Gray => vec![frame.iter().map(|&v| to_u8_level(v as f64)).collect()],
            ColorSpace::Rgb => {
                let mut p = vec![Vec::with_capacity(w * h); 3];
                for px in frame.chunks_exact(3) {
                    let ycc = to_ycbcr(
                        to_u8_level(px[0] as f64),
                        to_u8_level(px[1] as f64),
                        to_u8_level(px[2] as f64),
                    );
                    for c in 0..3 {
                        p[c].push(ycc[c]);
                    }
                }
                p
            }
        }
    };
    let frames = Exec::default().map(seq.len(), |t| {
        let mut planes = planes_of(seq.frame(t));
        for (c, plane) in planes.iter_mut().enumerate() {
            let table = if c == 0 { &luma } else { &chroma };
            for by in (0..h).step_by(8) {
                for bx in (0..w).step_by(8) {
                    let mut block = [0.0; 64];
                    for y in 0..8 {
                        for x in 0..8 {
                            let sy = (by + y).min(h - 1);
                            let sx = (bx + x).min(w - 1);
                            block[y * 8 + x] = plane[sy * w + sx] - 128.0;
                        }
                    }
                    quantize_block(&mut block, table);
                    for y in 0..8.min(h - by) {
                        for x in 0..8.min(w - bx) {
                            plane[(by + y) * w + bx + x] = block[y * 8 + x] + 128.0;
                        }
                    }
                }
            }
        }
        match seq.color() {
            ColorSpace::Gray => planes[0].iter().map(|&v| to_u8_level(v) as f32).collect(),
            ColorSpace::Rgb => {
                let mut out = Vec::with_capacity(w * h * 3);
                for i in 0..w * h {
                    let rgb = from_ycbcr(planes[0][i], planes[1][i], planes[2][i]);
                    out.extend(rgb.map(|v| to_u8_level(v) as f32));
                }
                out
            }
        }
    });
    seq.with_frames(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ops() {
        assert_eq!("identity".parse::<DegradeOp>().unwrap(), DegradeOp::Identity);
        assert_eq!("resize:0.5".parse::<DegradeOp>().unwrap(), DegradeOp::Resize { scale: 0.5 });
        assert_eq!("quantize:5".parse::<DegradeOp>().unwrap(), DegradeOp::Quantize { quality: 5 });
        assert_eq!(
            "frame_drop:0.2:9".parse::<DegradeOp>().unwrap(),
            DegradeOp::FrameDrop { p: 0.2, seed: 9 }
        );
        for bad in ["resize", "resize:2", "quantize:0", "blur:1", "identity:1", "quantize:x"] {
            assert!(bad.parse::<DegradeOp>().is_err(), "{bad}");
        }
    }
    use crate::synth::{gen_video, SynthConfig};

    fn ramp_video(w: usize, h: usize, n: usize) -> FrameSequence {
        let frames = (0..n)
            .map(|t| {
                let mut f = Vec::with_capacity(w * h * 3);
                for y in 0..h {
                    for x in 0..w {
                        f.extend([
                            (x + t) as f32 % 256.0,
                            (y * 2) as f32 % 256.0,
                            ((x + y) / 2) as f32,
                        ]);
                    }
                }
                f
            })
            .collect();
        FrameSequence::new(w, h, ColorSpace::Rgb, 30.0, frames).unwrap()
    }

    fn max_diff(a: &FrameSequence, b: &FrameSequence) -> f32 {
        a.frames()
            .iter()
            .flatten()
            .zip(b.frames().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f32::max)
    }

    #[test]
    fn identity_limits() {
        let (seq, _, _) = gen_video(&SynthConfig {
            duration_sec: 1.0,
            noise_sigma: 2.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let same = degrade(&seq, &DegradeOp::Resize { scale: 1.0 }).unwrap();
        assert_eq!(same, seq);
        // quality 100 still rounds every DCT coefficient to a unit step, so
        // the bound holds for almost every value rather than all of them
        let q = degrade(&seq, &DegradeOp::Quantize { quality: 100 }).unwrap();
        let levels = seq
            .with_frames(
                seq.frames()
                    .iter()
                    .map(|f| f.iter().map(|&v| to_u8_level(v as f64) as f32).collect())
                    .collect(),
            )
            .unwrap();
        let d: Vec<f32> = q
            .frames()
            .iter()
            .flatten()
            .zip(levels.frames().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .collect();
        let over = d.iter().filter(|&&v| v > 1.0).count() as f64 / d.len() as f64;
        let mean = d.iter().map(|&v| v as f64).sum::<f64>() / d.len() as f64;
        assert!(over < 0.01, "{over}");
        assert!(mean < 0.5, "{mean}");
        assert!(max_diff(&q, &levels) <= 3.0);
    }

    #[test]
    fn half_scale_dimensions() {
        let seq = ramp_video(640, 480, 2);
        let out = degrade(&seq, &DegradeOp::Resize { scale: 0.5 }).unwrap();
        assert_eq!((out.width(), out.height(), out.len()), (320, 240, 2));
        // exact 2x2 box average
        let want = (seq.pixel(1, 10, 6)[0] + seq.pixel(1, 11, 6)[0]
            + seq.pixel(1, 10, 7)[0]
            + seq.pixel(1, 11, 7)[0])
            / 4.0;
        assert!((out.pixel(1, 5, 3)[0] - want).abs() < 1e-4);
    }

    #[test]
    fn area_resize_preserves_mean() {
        let seq = ramp_video(60, 45, 1);
        let out = degrade(&seq, &DegradeOp::Resize { scale: 2.0 / 3.0 }).unwrap();
        assert_eq!((out.width(), out.height()), (40, 30));
        let mean = |s: &FrameSequence| {
            s.frame(0).iter().map(|&v| v as f64).sum::<f64>() / s.frame(0).len() as f64
        };
        assert!((mean(&seq) - mean(&out)).abs() < 1e-3);
    }

    #[test]
    fn area_weights_sum_to_one() {
        for (a, b) in [(72, 48), (72, 54), (10, 3), (7, 7)] {
            for w in area_weights(a, b) {
                let s: f64 = w.iter().map(|x| x.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dct_round_trip_is_exact_without_quantization() {
        let mut block = [0.0; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i * 37) % 101) as f64 - 50.0;
        }
        let orig = block;
        quantize_block(&mut block, &[1e-9; 64]);
        for i in 0..64 {
            assert!((block[i] - orig[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn quality_tables() {
        assert!(scaled_table(&LUMA_TABLE, 100).iter().all(|&v| v == 1.0));
        assert_eq!(scaled_table(&LUMA_TABLE, 50)[0], 16.0);
        assert_eq!(scaled_table(&LUMA_TABLE, 10)[0], 80.0);
        let lo = scaled_table(&CHROMA_TABLE, 5);
        let hi = scaled_table(&CHROMA_TABLE, 90);
        assert!(lo.iter().zip(&hi).all(|(a, b)| a >= b));
    }

    #[test]
    fn low_quality_loses_more() {
        let seq = ramp_video(48, 40, 2);
        let e10 = max_diff(&degrade(&seq, &DegradeOp::Quantize { quality: 10 }).unwrap(), &seq);
        let e90 = max_diff(&degrade(&seq, &DegradeOp::Quantize { quality: 90 }).unwrap(), &seq);
        assert!(e10 > e90, "{e10} vs {e90}");
    }

    #[test]
    fn frame_drop_keeps_count_and_repeats() {
        let seq = ramp_video(16, 16, 50);
        let op = DegradeOp::FrameDrop { p: 0.5, seed: 4 };
        let out = degrade(&seq, &op).unwrap();
        assert_eq!(out.len(), 50);
        assert_eq!(out.frame_rate_hz(), 30.0);
        assert_eq!(out.frame(0), seq.frame(0));
        let mut repeats = 0;
        for t in 1..50 {
            if out.frame(t) == out.frame(t - 1) {
                repeats += 1;
            } else {
                assert_eq!(out.frame(t), seq.frame(t));
            }
        }
        assert!(repeats > 10 && repeats < 40, "{repeats}");
        assert_eq!(out, degrade(&seq, &op).unwrap());
        assert_eq!(degrade(&seq, &DegradeOp::FrameDrop { p: 0.0, seed: 4 }).unwrap(), seq);
    }

    #[test]
    fn landmarks_follow_degradation() {
        let cfg = SynthConfig {
            duration_sec: 2.0,
            motion_amp_px: 2.0,
            ..SynthConfig::default()
        };
        let (seq, track, _) = gen_video(&cfg).unwrap();
        let (out, t2) =
            degrade_with_landmarks(&seq, &track, &DegradeOp::Resize { scale: 0.5 }).unwrap();
        assert_eq!(out.width(), 36);
        let (a, b) = (track.points(5)[8], t2.points(5)[8]);
        assert!((a.x / 2.0 - b.x).abs() < 1e-12 && (a.y / 2.0 - b.y).abs() < 1e-12);

        let op = DegradeOp::FrameDrop { p: 0.3, seed: 1 };
        let (out, t3) = degrade_with_landmarks(&seq, &track, &op).unwrap();
        for t in 1..out.len() {
            if out.frame(t) == out.frame(t - 1) {
                assert_eq!(t3.points(t), t3.points(t - 1));
            }
        }
    }

    #[test]
    fn invalid_ops_rejected() {
        let seq = ramp_video(16, 16, 2);
        assert!(degrade(&seq, &DegradeOp::Resize { scale: 0.0 }).is_err());
        assert!(degrade(&seq, &DegradeOp::Resize { scale: 1.5 }).is_err());
        assert!(degrade(&seq, &DegradeOp::Quantize { quality: 0 }).is_err());
        assert!(degrade(&seq, &DegradeOp::Quantize { quality: 101 }).is_err());
        assert!(degrade(&seq, &DegradeOp::FrameDrop { p: 1.5, seed: 0 }).is_err());
    }
}
