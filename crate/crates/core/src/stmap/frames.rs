use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Color layout of a frame sequence. `Gray` covers single-channel NIR video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb => 3,
            ColorSpace::Gray => 1,
        }
    }

    pub fn from_channels(c: usize) -> Result<Self> {
        match c {
            3 => Ok(ColorSpace::Rgb),
            1 => Ok(ColorSpace::Gray),
            _ => Err(Error::InvalidInput(format!(
                "frames must have 1 or 3 channels, got {c}"
            ))),
        }
    }
}

/// Ordered raster frames sharing one geometry, stored interleaved
/// (`(y * width + x) * channels + c`) as real intensities on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    color: ColorSpace,
    frame_rate_hz: f64,
    frames: Vec<Vec<f32>>,
}

impl FrameSequence {
    pub fn new(
        width: usize,
        height: usize,
        color: ColorSpace,
        frame_rate_hz: f64,
        frames: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("frames must be non-empty".into()));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        let expected = width * height * color.channels();
        for (t, f) in frames.iter().enumerate() {
            if f.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "frame {t} has {} values, expected {expected}",
                    f.len()
                )));
            }
        }
        Ok(Self {
            width,
            height,
            color,
            frame_rate_hz,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn color(&self) -> ColorSpace {
        self.color
    }

    pub fn channels(&self) -> usize {
        self.color.channels()
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<f32>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Vec<f32>> {
        self.frames
    }

    #[inline]
    pub fn pixel(&self, t: usize, x: usize, y: usize) -> &[f32] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &self.frames[t][i..i + c]
    }

    /// Same geometry and timing, different pixel data.
    pub fn with_frames(&self, frames: Vec<Vec<f32>>) -> Result<Self> {
        FrameSequence::new(
            self.width,
            self.height,
            self.color,
            self.frame_rate_hz,
            frames,
        )
    }
}
