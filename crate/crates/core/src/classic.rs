//! Classical pulse extraction from skin-averaged RGB traces: GREEN, CHROM
//! (chrominance projection) and POS (plane orthogonal to skin). All three
//! share the detrend + band-pass front end and the spectral readout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{bandpass, detrend, spectral_hr, BandConfig, HrEstimate, PulseTrace, DEFAULT_DETREND_SEC};
use crate::stmap::{build_stmap_raw, FrameSequence, Grid, LandmarkTrack, MapColor, StmapOptions, ColorSpace};

pub const DEFAULT_POS_WINDOW_SEC: f64 = 1.6;

/// Per-frame means of the skin pixels in the ROI, one series per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTrace {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl RgbTrace {
    pub fn new(r: Vec<f64>, g: Vec<f64>, b: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if r.len() != g.len() || r.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "channel lengths differ: {} / {} / {}",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        if r.len() < 2 {
            return Err(Error::InvalidInput("RGB trace needs at least 2 frames".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if r.iter().chain(&g).chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("RGB trace has non-finite values".into()));
        }
        Ok(Self {
            r,
            g,
            b,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Frames `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<RgbTrace> {
        if start >= end || end > self.len() {
            return Err(Error::Config(format!(
                "invalid slice [{start}, {end}) of {} frames",
                self.len()
            )));
        }
        RgbTrace::new(
            self.r[start..end].to_vec(),
            self.g[start..end].to_vec(),
            self.b[start..end].to_vec(),
            self.sample_rate_hz,
        )
    }

    pub fn scaled(&self, k: f64) -> RgbTrace {
        let s = |v: &[f64]| v.iter().map(|x| x * k).collect();
        RgbTrace {
            r: s(&self.r),
            g: s(&self.g),
            b: s(&self.b),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicMethod {
    Green,
    Chrom,
    Pos,
}

impl std::str::FromStr for ClassicMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "green" => Ok(ClassicMethod::Green),
            "chrom" => Ok(ClassicMethod::Chrom),
            "pos" => Ok(ClassicMethod::Pos),
            other => Err(Error::Config(format!("unknown classical method `{other}`"))),
        }
    }
}

impl ClassicMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClassicMethod::Green => "green",
            ClassicMethod::Chrom => "chrom",
            ClassicMethod::Pos => "pos",
        }
    }

    pub fn pulse(self, trace: &RgbTrace, band: &BandConfig) -> Result<PulseTrace> {
        match self {
            ClassicMethod::Green => green_pulse(trace, band),
            ClassicMethod::Chrom => chrom_pulse(trace, band),
            ClassicMethod::Pos => pos_pulse(trace, band, DEFAULT_POS_WINDOW_SEC),
        }
    }

    pub fn estimate(self, trace: &RgbTrace, band: &BandConfig) -> Result<HrEstimate> {
        spectral_hr(&self.pulse(trace, band)?, band)
    }
}

/// Whole-ROI skin mean per frame, i.e. the 1x1-grid map in raw RGB before
/// normalization. Frames without a usable ROI are linearly interpolated from
/// their nearest usable neighbors.
pub fn extract_rgb_trace(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    opts: &StmapOptions,
) -> Result<RgbTrace> {
    if seq.color() != ColorSpace::Rgb {
        return Err(Error::InvalidInput("RGB trace extraction needs color frames".into()));
    }
    let opts = StmapOptions {
        grid: Grid::new(1, 1),
        color: MapColor::Rgb,
        ..opts.clone()
    };
    let map = build_stmap_raw(seq, track, &opts)?;
    let mut channels: Vec<Vec<f64>> = (0..3).map(|c| map.row(0, c)).collect();
    for ch in channels.iter_mut() {
        fill_gaps(ch, map.mask());
    }
    let [r, g, b]: [Vec<f64>; 3] = channels.try_into().expect("three channels");
    RgbTrace::new(r, g, b, seq.frame_rate_hz())
}

/// Linear interpolation over flagged samples; ends copy the nearest good one.
pub(crate) fn fill_gaps(x: &mut [f64], missing: &[bool]) {
    let good: Vec<usize> = (0..x.len()).filter(|&i| !missing[i]).collect();
    if good.is_empty() {
        return;
    }
    for i in 0..x.len() {
        if !missing[i] {
            continue;
        }
        let next = good.partition_point(|&g| g < i);
        x[i] = match (next.checked_sub(1).map(|j| good[j]), good.get(next)) {
            (Some(a), Some(&b)) => x[a] + (x[b] - x[a]) * (i - a) as f64 / (b - a) as f64,
            (Some(a), None) => x[a],
            (None, Some(&b)) => x[b],
            (None, None) => unreachable!(),
        };
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn normalize_by_mean(x: &[f64], name: &str) -> Result<Vec<f64>> {
    let m = mean(x);
    if !(m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "{name} channel mean must be positive, got {m}"
        )));
    }
    Ok(x.iter().map(|v| v / m).collect())
}

/// Detrend then band-pass: the front end shared by all extractors.
pub fn front_end(samples: Vec<f64>, sample_rate_hz: f64, band: &BandConfig) -> Result<PulseTrace> {
    let trace = PulseTrace::new(samples, sample_rate_hz)?;
    bandpass(&detrend(&trace, DEFAULT_DETREND_SEC)?, band)
}

/// Mean-normalized, filtered green channel.
pub fn green_pulse(trace: &RgbTrace, band: &BandConfig) -> Result<PulseTrace> {
    front_end(normalize_by_mean(&trace.g, "green")?, trace.sample_rate_hz, band)
}

pub fn green_hr(trace: &RgbTrace, band: &BandConfig) -> Result<HrEstimate> {
    spectral_hr(&green_pulse(trace, band)?, band)
}

/// Chrominance pulse: `S = Xf - (σ(Xf)/σ(Yf)) Yf` with
/// `X = 3Rn - 2Gn`, `Y = 1.5Rn + Gn - 1.5Bn` on mean-normalized channels.
pub fn chrom_pulse(trace: &RgbTrace, band: &BandConfig) -> Result<PulseTrace> {
    let rn = normalize_by_mean(&trace.r, "red")?;
    let gn = normalize_by_mean(&trace.g, "green")?;
    let bn = normalize_by_mean(&trace.b, "blue")?;
    let xc: Vec<f64> = rn.iter().zip(&gn).map(|(r, g)| 3.0 * r - 2.0 * g).collect();
    let yc: Vec<f64> = rn
        .iter()
        .zip(&gn)
        .zip(&bn)
        .map(|((r, g), b)| 1.5 * r + g - 1.5 * b)
        .collect();
    let fs = trace.sample_rate_hz;
    let xf = front_end(xc, fs, band)?;
    let yf = front_end(yc, fs, band)?;
    let (sx, sy) = (std_dev(xf.samples()), std_dev(yf.samples()));
    let alpha = if sy > 1e-12 * sx && sy > 0.0 { sx / sy } else { 0.0 };
    let s: Vec<f64> = xf
        .samples()
        .iter()
        .zip(yf.samples())
        .map(|(x, y)| x - alpha * y)
        .collect();
    let ss = std_dev(&s);
    if ss == 0.0 || ss <= 1e-12 * (sx + sy) {
        return Err(Error::Degenerate(
            "chrominance signals cancel (no pulsatile color difference)".into(),
        ));
    }
    PulseTrace::new(s, fs)
}

pub fn chrom_hr(trace: &RgbTrace, band: &BandConfig) -> Result<HrEstimate> {
    spectral_hr(&chrom_pulse(trace, band)?, band)
}

/// Overlap-added POS signal before the shared front end.
pub fn pos_raw(trace: &RgbTrace, window_sec: f64) -> Result<Vec<f64>> {
    let n = trace.len();
    let len = (window_sec * trace.sample_rate_hz).round() as usize;
    if !(window_sec > 0.0) || len < 2 || len > n {
        return Err(Error::Config(format!(
            "POS window of {len} frames does not fit a {n}-frame trace"
        )));
    }
    let mut out = vec![0.0; n];
    let mut s1 = vec![0.0; len];
    let mut s2 = vec![0.0; len];
    for m in 0..=n - len {
        let w = m..m + len;
        let (mr, mg, mb) = (mean(&trace.r[w.clone()]), mean(&trace.g[w.clone()]), mean(&trace.b[w.clone()]));
        if !(mr > 0.0 && mg > 0.0 && mb > 0.0) {
            return Err(Error::InvalidInput(format!(
                "non-positive channel mean in POS window starting at frame {m}"
            )));
        }
        for i in 0..len {
            let r = trace.r[m + i] / mr;
            let g = trace.g[m + i] / mg;
            let b = trace.b[m + i] / mb;
            s1[i] = g - b;
            s2[i] = -2.0 * r + g + b;
        }
        let sd2 = std_dev(&s2);
        let sd1 = std_dev(&s1);
        let alpha = if sd2 > 1e-12 * sd1 && sd2 > 0.0 { sd1 / sd2 } else { 0.0 };
        let h: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect();
        let hm = mean(&h);
        for i in 0..len {
            out[m + i] += h[i] - hm;
        }
    }
    Ok(out)
}

pub fn pos_pulse(trace: &RgbTrace, band: &BandConfig, window_sec: f64) -> Result<PulseTrace> {
    let raw = pos_raw(trace, window_sec)?;
    if raw.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("POS projection is identically zero".into()));
    }
    front_end(raw, trace.sample_rate_hz, band)
}

pub fn pos_hr(trace: &RgbTrace, band: &BandConfig, window_sec: f64) -> Result<HrEstimate> {
    spectral_hr(&pos_pulse(trace, band, window_sec)?, band)
}
