use super::landmarks::{LandmarkLayout, Landmarks, Point};
use crate::error::{Error, Result};

/// Aligned cheek-and-forehead box.
///
/// `origin` is the image position of the box's top-left corner; the box
/// spans `width()` along the eye line and `height()` = 1.5·h toward the chin,
/// with axes rotated by `rotation_deg` from the image axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBox {
    /// Distance between the outer cheek border points along the eye line.
    pub w: f64,
    /// Distance from the eye-center midpoint to the chin, perpendicular to the eye line.
    pub h: f64,
    pub origin: Point,
    pub rotation_deg: f64,
}

impl RoiBox {
    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn height(&self) -> f64 {
        1.5 * self.h
    }

    /// Unit vectors of the box axes (along the eye line, toward the chin).
    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        (Point::new(c, s), Point::new(-s, c))
    }

    /// Box coordinates `(u, v)` of an image point; inside iff
    /// `0 <= u < width()` and `0 <= v < height()`.
    #[inline]
    pub fn to_box(&self, p: Point) -> (f64, f64) {
        let (ex, ey) = self.axes();
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        (dx * ex.x + dy * ex.y, dx * ey.x + dy * ey.y)
    }

    pub fn corners(&self) -> [Point; 4] {
        let (ex, ey) = self.axes();
        let at = |u: f64, v: f64| {
            Point::new(
                self.origin.x + u * ex.x + v * ey.x,
                self.origin.y + u * ex.y + v * ey.y,
            )
        };
        [
            at(0.0, 0.0),
            at(self.width(), 0.0),
            at(0.0, self.height()),
            at(self.width(), self.height()),
        ]
    }

    /// Pixel index range `[x0, x1) x [y0, y1)` covering the box, clipped to
    /// a `width x height` image.
    pub fn pixel_bounds(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let c = self.corners();
        let min_x = c.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = c.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = c.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = c.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let clip = |v: f64, hi: usize| (v.max(0.0) as usize).min(hi);
        (
            clip(min_x.floor(), width),
            clip(max_x.ceil() + 1.0, width),
            clip(min_y.floor(), height),
            clip(max_y.ceil() + 1.0, height),
        )
    }
}

/// ROI from one frame of landmarks.
///
/// The frame is aligned on the eye centers; in the aligned frame `w` is the
/// horizontal cheek-to-cheek distance and `h` the vertical distance from the
/// eye-center midpoint to the chin. The box runs from `0.5·h` above the eye
/// midpoint (forehead) down to the chin.
pub fn compute_roi(points: &Landmarks, layout: &LandmarkLayout) -> Result<RoiBox> {
    let le = points[layout.left_eye_center];
    let re = points[layout.right_eye_center];
    let (mut dx, mut dy) = (re.x - le.x, re.y - le.y);
    let eye_dist = dx.hypot(dy);
    if !(eye_dist > 1e-9) {
        return Err(Error::Degenerate("eye centers coincide".into()));
    }
    // orientation of the eye line is taken modulo 180 degrees
    if dx < 0.0 {
        dx = -dx;
        dy = -dy;
    }
    let mut theta = dy.atan2(dx);
    let mid = Point::new(0.5 * (le.x + re.x), 0.5 * (le.y + re.y));

    let aligned = |p: Point, theta: f64| {
        let (s, c) = theta.sin_cos();
        let (px, py) = (p.x - mid.x, p.y - mid.y);
        (px * c + py * s, -px * s + py * c)
    };
    let chin = points[layout.chin];
    if aligned(chin, theta).1 < 0.0 {
        // upside-down face: flip so the box grows toward the chin
        theta += std::f64::consts::PI;
    }
    let h = aligned(chin, theta).1;
    let (ul, _) = aligned(points[layout.left_cheek], theta);
    let (ur, _) = aligned(points[layout.right_cheek], theta);
    let w = (ur - ul).abs();
    if !(w > 1e-9 && h > 1e-9) {
        return Err(Error::Degenerate(format!(
            "ROI collapses (w = {w}, h = {h})"
        )));
    }
    let u0 = ul.min(ur);
    let v0 = -0.5 * h;
    let (s, c) = theta.sin_cos();
    let origin = Point::new(mid.x + u0 * c - v0 * s, mid.y + u0 * s + v0 * c);
    let mut rotation_deg = theta.to_degrees();
    if rotation_deg > 180.0 {
        rotation_deg -= 360.0;
    }
    Ok(RoiBox {
        w,
        h,
        origin,
        rotation_deg,
    })
}
