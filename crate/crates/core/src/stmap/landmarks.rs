use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 81;
/// Default temporal smoothing width in frames.
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn lerp(self, other: Point, s: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * s,
            self.y + (other.y - self.y) * s,
        )
    }
}

pub type Landmarks = [Point; NUM_LANDMARKS];

/// Indices of the landmarks the ROI geometry relies on.
///
/// The default follows the 81-point scheme used throughout this crate:
/// 0–16 jaw contour (8 is the chin), 17–26 brows, 27–35 nose, 36–47 eye
/// contours, 48–67 mouth, 68/69 left/right eye centers, 70–80 forehead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkLayout {
    pub left_eye_center: usize,
    pub right_eye_center: usize,
    pub left_cheek: usize,
    pub right_cheek: usize,
    pub chin: usize,
}

impl Default for LandmarkLayout {
    fn default() -> Self {
        Self {
            left_eye_center: 68,
            right_eye_center: 69,
            left_cheek: 1,
            right_cheek: 15,
            chin: 8,
        }
    }
}

/// Per-frame facial landmarks plus detector success flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    points: Vec<Landmarks>,
    valid: Vec<bool>,
}

impl LandmarkTrack {
    pub fn new(points: Vec<Landmarks>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != valid.len() {
            return Err(Error::InvalidInput(format!(
                "{} landmark frames but {} validity flags",
                points.len(),
                valid.len()
            )));
        }
        for (t, (pts, ok)) in points.iter().zip(&valid).enumerate() {
            if *ok && pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "non-finite landmark in valid frame {t}"
                )));
            }
        }
        Ok(Self { points, valid })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self, t: usize) -> &Landmarks {
        &self.points[t]
    }

    pub fn is_valid(&self, t: usize) -> bool {
        self.valid[t]
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Checks the track against a frame geometry: equal length and every valid
    /// frame's points inside `[0, width) x [0, height)`.
    pub fn check_against(&self, frames: usize, width: usize, height: usize) -> Result<()> {
        if self.len() != frames {
            return Err(Error::InvalidInput(format!(
                "landmark track has {} frames, video has {frames}",
                self.len()
            )));
        }
        for t in 0..self.len() {
            if !self.valid[t] {
                continue;
            }
            if let Some(i) = self.points[t].iter().position(|p| {
                !(p.x >= 0.0 && p.x < width as f64 && p.y >= 0.0 && p.y < height as f64)
            }) {
                return Err(Error::InvalidInput(format!(
                    "landmark {i} of frame {t} lies outside the {width}x{height} frame"
                )));
            }
        }
        Ok(())
    }
}

/// Centered moving average of every landmark coordinate over the valid frames
/// in a `window_frames` neighborhood (truncated at the ends).
///
/// Invalid frames are then filled by linear interpolation between the nearest
/// valid neighbors (or copied from the only neighbor at either end) and keep
/// their invalid flag.
pub fn smooth_landmarks(track: &LandmarkTrack, window_frames: usize) -> Result<LandmarkTrack> {
    if window_frames == 0 || window_frames % 2 == 0 {
        return Err(Error::Config(format!(
            "smoothing window must be odd and positive, got {window_frames}"
        )));
    }
    let n = track.len();
    let valid_idx: Vec<usize> = (0..n).filter(|&t| track.valid[t]).collect();
    if valid_idx.is_empty() {
        return Err(Error::InvalidInput("landmark track has no valid frames".into()));
    }
    let half = window_frames / 2;
    let mut out = track.points.clone();

    for &t in &valid_idx {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(n - 1);
        let neighbors: Vec<usize> = (lo..=hi).filter(|&s| track.valid[s]).collect();
        let k = neighbors.len() as f64;
        for i in 0..NUM_LANDMARKS {
            let (sx, sy) = neighbors.iter().fold((0.0, 0.0), |(ax, ay), &s| {
                (ax + track.points[s][i].x, ay + track.points[s][i].y)
            });
            out[t][i] = Point::new(sx / k, sy / k);
        }
    }

    for t in 0..n {
        if track.valid[t] {
            continue;
        }
        let next = valid_idx.partition_point(|&v| v < t);
        let before = next.checked_sub(1).map(|j| valid_idx[j]);
        let after = valid_idx.get(next).copied();
        out[t] = match (before, after) {
            (Some(a), Some(b)) => {
                let s = (t - a) as f64 / (b - a) as f64;
                let mut pts = out[a];
                for i in 0..NUM_LANDMARKS {
                    pts[i] = out[a][i].lerp(out[b][i], s);
                }
                pts
            }
            (Some(a), None) => out[a],
            (None, Some(b)) => out[b],
            (None, None) => unreachable!("at least one valid frame"),
        };
    }

    Ok(LandmarkTrack {
        points: out,
        valid: track.valid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_frame(x: f64, y: f64) -> Landmarks {
        let mut pts = [Point::default(); NUM_LANDMARKS];
        for (i, p) in pts.iter_mut().enumerate() {
            *p = Point::new(x + i as f64, y - i as f64 * 0.5);
        }
        pts
    }

    #[test]
    fn static_points_unchanged() {
        let track = LandmarkTrack::new(vec![constant_frame(10.0, 90.0); 9], vec![true; 9]).unwrap();
        for w in [1, 3, 5, 7] {
            let s = smooth_landmarks(&track, w).unwrap();
            assert_eq!(s, track);
        }
    }

    #[test]
    fn spike_reduced_to_a_third() {
        let mut frames = vec![constant_frame(10.0, 90.0); 7];
        for p in frames[3].iter_mut() {
            p.x += 9.0;
        }
        let track = LandmarkTrack::new(frames, vec![true; 7]).unwrap();
        let s = smooth_landmarks(&track, 3).unwrap();
        for i in 0..NUM_LANDMARKS {
            let base = 10.0 + i as f64;
            assert!((s.points(3)[i].x - (base + 3.0)).abs() < 1e-12);
            assert!((s.points(2)[i].x - (base + 3.0)).abs() < 1e-12);
            assert!((s.points(0)[i].x - base).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_frame_interpolated_and_flagged() {
        let frames = vec![constant_frame(0.0, 0.0), constant_frame(99.0, 99.0), constant_frame(10.0, 20.0)];
        let track = LandmarkTrack::new(frames, vec![true, false, true]).unwrap();
        let s = smooth_landmarks(&track, 1).unwrap();
        assert!(!s.is_valid(1));
        for i in 0..NUM_LANDMARKS {
            let a = track.points(0)[i];
            let b = track.points(2)[i];
            assert!((s.points(1)[i].x - 0.5 * (a.x + b.x)).abs() < 1e-12);
            assert!((s.points(1)[i].y - 0.5 * (a.y + b.y)).abs() < 1e-12);
        }
    }

    #[test]
    fn leading_invalid_frames_copy_first_valid() {
        let frames = vec![constant_frame(0.0, 0.0), constant_frame(5.0, 5.0), constant_frame(5.0, 5.0)];
        let track = LandmarkTrack::new(frames, vec![false, true, true]).unwrap();
        let s = smooth_landmarks(&track, 3).unwrap();
        assert_eq!(s.points(0), s.points(1));
    }

    #[test]
    fn rejects_all_invalid_and_even_window() {
        let track = LandmarkTrack::new(vec![constant_frame(0.0, 0.0); 3], vec![false; 3]).unwrap();
        assert!(matches!(smooth_landmarks(&track, 3), Err(Error::InvalidInput(_))));
        let track = LandmarkTrack::new(vec![constant_frame(0.0, 0.0); 3], vec![true; 3]).unwrap();
        assert!(matches!(smooth_landmarks(&track, 4), Err(Error::Config(_))));
        assert!(matches!(smooth_landmarks(&track, 0), Err(Error::Config(_))));
    }

    #[test]
    fn geometry_check() {
        let track = LandmarkTrack::new(vec![constant_frame(1.0, 60.0); 2], vec![true, true]).unwrap();
        assert!(track.check_against(2, 100, 100).is_ok());
        assert!(track.check_against(3, 100, 100).is_err());
        assert!(track.check_against(2, 50, 100).is_err());
    }
}
