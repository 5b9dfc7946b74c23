use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// The YUV transform used for map building:
///
/// ```text
/// Y =  0.299 R + 0.587 G + 0.114 B
/// U = -0.169 R - 0.331 G + 0.5   B + 128
/// V =  0.5   R - 0.419 G - 0.081 B + 128
/// ```
///
/// No clamping; inputs and outputs are real-valued. The chroma rows sum to
/// zero, so they are evaluated as weighted channel differences, which keeps
/// U and V at exactly 128 for gray pixels.
#[inline]
pub fn rgb_to_yuv(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        0.169 * (b - r) + 0.331 * (b - g) + 128.0,
        0.419 * (r - g) + 0.081 * (r - b) + 128.0,
    ]
}

/// Fixed chroma-threshold skin classifier in YUV space (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinRule {
    pub y: (f64, f64),
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Default for SkinRule {
    fn default() -> Self {
        Self {
            y: (40.0, 250.0),
            u: (90.0, 135.0),
            v: (135.0, 180.0),
        }
    }
}

impl SkinRule {
    #[inline]
    pub fn is_skin_yuv(&self, [y, u, v]: [f64; 3]) -> bool {
        (self.y.0..=self.y.1).contains(&y)
            && (self.u.0..=self.u.1).contains(&u)
            && (self.v.0..=self.v.1).contains(&v)
    }

    #[inline]
    pub fn is_skin(&self, r: f64, g: f64, b: f64) -> bool {
        self.is_skin_yuv(rgb_to_yuv(r, g, b))
    }
}

/// Static per-pixel mask (row-major, `width * height`).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl PixelMask {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// How ROI pixels are classified as skin. Gray (NIR) frames always use every
/// ROI pixel regardless of this setting, except for `External`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SkinSegmenter {
    #[default]
    Chroma,
    ChromaWith(SkinRule),
    /// Every ROI pixel counts as skin.
    All,
    /// A mask loaded from file, shared by all frames.
    External(Arc<PixelMask>),
}

impl SkinSegmenter {
    pub fn rule(&self) -> Option<SkinRule> {
        match self {
            SkinSegmenter::Chroma => Some(SkinRule::default()),
            SkinSegmenter::ChromaWith(r) => Some(*r),
            _ => None,
        }
    }
}
