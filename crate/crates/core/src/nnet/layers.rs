//! Per-sample layer kernels on `C x H x W` slices. Convolutions are
//! stride 1 with zero "same" padding; pooling is non-overlapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize },
    Relu,
    MaxPool { size: usize },
    GlobalAvgPool,
    /// Fully connected over the flattened input.
    Dense { out: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape3 {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl LayerSpec {
    pub fn output_shape(&self, s: Shape3) -> Result<Shape3> {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => {
                if out_channels == 0 || kernel % 2 == 0 {
                    return Err(Error::Config(format!(
                        "conv needs out_channels > 0 and an odd kernel, got {out_channels}/{kernel}"
                    )));
                }
                Ok(Shape3::new(out_channels, s.h, s.w))
            }
            LayerSpec::Relu => Ok(s),
            LayerSpec::MaxPool { size } => {
                if size == 0 || s.h < size || s.w < size {
                    return Err(Error::Config(format!(
                        "cannot pool {}x{} by {size}",
                        s.h, s.w
                    )));
                }
                Ok(Shape3::new(s.c, s.h / size, s.w / size))
            }
            LayerSpec::GlobalAvgPool => Ok(Shape3::new(s.c, 1, 1)),
            LayerSpec::Dense { out } => {
                if out == 0 {
                    return Err(Error::Config("dense layer needs out > 0".into()));
                }
                Ok(Shape3::new(out, 1, 1))
            }
        }
    }

    /// `(weights, biases)` parameter counts for input shape `s`.
    pub fn param_counts(&self, s: Shape3) -> (usize, usize) {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => (out_channels * s.c * kernel * kernel, out_channels),
            LayerSpec::Dense { out } => (out * s.len(), out),
            _ => (0, 0),
        }
    }

    pub fn fan_in(&self, s: Shape3) -> usize {
        match *self {
            LayerSpec::Conv { kernel, .. } => s.c * kernel * kernel,
            LayerSpec::Dense { .. } => s.len(),
            _ => 0,
        }
    }

    pub fn is_relu(&self) -> bool {
        matches!(self, LayerSpec::Relu)
    }
}

/// Row range `r` (and the same for columns) for which `r + off - p` stays
/// inside `[0, n)`.
fn valid_range(n: usize, off: usize, p: usize) -> (usize, usize) {
    let lo = p.saturating_sub(off);
    (lo, (n + p).saturating_sub(off).min(n).max(lo))
}

pub(crate) fn conv_forward(
    x: &[f64],
    s: Shape3,
    w: &[f64],
    b: &[f64],
    oc: usize,
    k: usize,
    y: &mut [f64],
) {
    let p = k / 2;
    let (h, wd, pl) = (s.h, s.w, s.plane());
    for o in 0..oc {
        let yo = &mut y[o * pl..(o + 1) * pl];
        yo.fill(b[o]);
        for i in 0..s.c {
            let xi = &x[i * pl..(i + 1) * pl];
            for ky in 0..k {
                let (r0, r1) = valid_range(h, ky, p);
                for kx in 0..k {
                    let wv = w[((o * s.c + i) * k + ky) * k + kx];
                    let (c0, c1) = valid_range(wd, kx, p);
                    for r in r0..r1 {
                        let src = (r + ky - p) * wd + c0 + kx - p;
                        let src = &xi[src..src + c1 - c0];
                        let dst = &mut yo[r * wd + c0..r * wd + c1];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients; writes the input gradient when
/// `dx` is given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    x: &[f64],
    s: Shape3,
    w: &[f64],
    oc: usize,
    k: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let p = k / 2;
    let (h, wd, pl) = (s.h, s.w, s.plane());
    if let Some(dx) = dx.as_deref_mut() {
        dx.fill(0.0);
    }
    for o in 0..oc {
        let dyo = &dy[o * pl..(o + 1) * pl];
        db[o] += dyo.iter().sum::<f64>();
        for i in 0..s.c {
            let xi = &x[i * pl..(i + 1) * pl];
            for ky in 0..k {
                let (r0, r1) = valid_range(h, ky, p);
                for kx in 0..k {
                    let wi = ((o * s.c + i) * k + ky) * k + kx;
                    let (c0, c1) = valid_range(wd, kx, p);
                    let mut acc = 0.0;
                    for r in r0..r1 {
                        let src = (r + ky - p) * wd + c0 + kx - p;
                        let g = &dyo[r * wd + c0..r * wd + c1];
                        acc += g
                            .iter()
                            .zip(&xi[src..src + c1 - c0])
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                    dw[wi] += acc;
                    if let Some(dx) = dx.as_deref_mut() {
                        let wv = w[wi];
                        let dxi = &mut dx[i * pl..(i + 1) * pl];
                        for r in r0..r1 {
                            let src = (r + ky - p) * wd + c0 + kx - p;
                            let g = &dyo[r * wd + c0..r * wd + c1];
                            for (d, gv) in dxi[src..src + c1 - c0].iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn relu_forward(x: &[f64], y: &mut [f64]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o = if v > 0.0 { v } else { 0.0 };
    }
}

/// Subgradient 0 at the kink.
pub(crate) fn relu_backward(x: &[f64], dy: &[f64], dx: &mut [f64]) {
    for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(x) {
        *d = if v > 0.0 { g } else { 0.0 };
    }
}

/// Max pooling; `arg` receives the input index of each maximum (first one
/// in scan order on ties).
pub(crate) fn maxpool_forward(x: &[f64], s: Shape3, size: usize, y: &mut [f64], arg: &mut [usize]) {
    let (oh, ow) = (s.h / size, s.w / size);
    for c in 0..s.c {
        for r in 0..oh {
            for q in 0..ow {
                let mut best = usize::MAX;
                let mut bv = f64::NEG_INFINITY;
                for dr in 0..size {
                    for dq in 0..size {
                        let i = (c * s.h + r * size + dr) * s.w + q * size + dq;
                        if x[i] > bv || best == usize::MAX {
                            bv = x[i];
                            best = i;
                        }
                    }
                }
                let o = (c * oh + r) * ow + q;
                y[o] = bv;
                arg[o] = best;
            }
        }
    }
}

pub(crate) fn maxpool_backward(arg: &[usize], dy: &[f64], dx: &mut [f64]) {
    dx.fill(0.0);
    for (&i, &g) in arg.iter().zip(dy) {
        dx[i] += g;
    }
}

pub(crate) fn gap_forward(x: &[f64], s: Shape3, y: &mut [f64]) {
    let pl = s.plane();
    for c in 0..s.c {
        y[c] = x[c * pl..(c + 1) * pl].iter().sum::<f64>() / pl as f64;
    }
}

pub(crate) fn gap_backward(s: Shape3, dy: &[f64], dx: &mut [f64]) {
    let pl = s.plane();
    for c in 0..s.c {
        dx[c * pl..(c + 1) * pl].fill(dy[c] / pl as f64);
    }
}

pub(crate) fn dense_forward(x: &[f64], w: &[f64], b: &[f64], y: &mut [f64]) {
    let n = x.len();
    for (o, out) in y.iter_mut().enumerate() {
        *out = b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

pub(crate) fn dense_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n = x.len();
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        for (d, v) in dw[o * n..(o + 1) * n].iter_mut().zip(x) {
            *d += g * v;
        }
    }
    if let Some(dx) = dx {
        for (j, d) in dx.iter_mut().enumerate() {
            *d = dy.iter().enumerate().map(|(o, g)| g * w[o * n + j]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition of a zero-padded cross-correlation.
    fn conv_oracle(x: &[f64], s: Shape3, w: &[f64], b: &[f64], oc: usize, k: usize) -> Vec<f64> {
        let p = k as isize / 2;
        let mut y = vec![0.0; oc * s.h * s.w];
        for o in 0..oc {
            for r in 0..s.h as isize {
                for q in 0..s.w as isize {
                    let mut acc = b[o];
                    for i in 0..s.c {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let (rr, qq) = (r + ky - p, q + kx - p);
                                if rr < 0 || qq < 0 || rr >= s.h as isize || qq >= s.w as isize {
                                    continue;
                                }
                                let wi = ((o * s.c + i) * k + ky as usize) * k + kx as usize;
                                acc += w[wi] * x[(i * s.h + rr as usize) * s.w + qq as usize];
                            }
                        }
                    }
                    y[(o * s.h + r as usize) * s.w + q as usize] = acc;
                }
            }
        }
        y
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        (0..n)
            .map(|i| (((i as u64 + 1) * (seed * 2 + 7919)) % 1000) as f64 / 500.0 - 1.0)
            .collect()
    }

    #[test]
    fn conv_matches_direct_definition() {
        for (s, oc, k) in [
            (Shape3::new(2, 5, 7), 3, 3),
            (Shape3::new(1, 4, 4), 2, 5),
            (Shape3::new(3, 1, 6), 1, 3),
        ] {
            let x = pseudo(s.len(), 1);
            let w = pseudo(oc * s.c * k * k, 2);
            let b = pseudo(oc, 3);
            let mut y = vec![0.0; oc * s.h * s.w];
            conv_forward(&x, s, &w, &b, oc, k, &mut y);
            let want = conv_oracle(&x, s, &w, &b, oc, k);
            for (a, e) in y.iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_input_gradient_is_adjoint() {
        // <conv(x), g> - bias term == <x, conv^T(g)>
        let s = Shape3::new(2, 4, 6);
        let (oc, k) = (3, 3);
        let x = pseudo(s.len(), 4);
        let w = pseudo(oc * s.c * k * k, 5);
        let b = vec![0.0; oc];
        let g = pseudo(oc * s.h * s.w, 6);
        let mut y = vec![0.0; g.len()];
        conv_forward(&x, s, &w, &b, oc, k, &mut y);
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; oc];
        let mut dx = vec![0.0; x.len()];
        conv_backward(&x, s, &w, oc, k, &g, &mut dw, &mut db, Some(&mut dx));
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // and <conv(x), g> is linear in w with gradient dw
        let lhs_w: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
        assert!((lhs - lhs_w).abs() < 1e-10);
    }

    #[test]
    fn maxpool_picks_maxima() {
        let s = Shape3::new(1, 2, 4);
        let x = [1.0, 5.0, 2.0, 2.0, 3.0, 0.0, 7.0, 1.0];
        let mut y = [0.0; 2];
        let mut arg = [0; 2];
        maxpool_forward(&x, s, 2, &mut y, &mut arg);
        assert_eq!(y, [5.0, 7.0]);
        assert_eq!(arg, [1, 6]);
        let mut dx = [0.0; 8];
        maxpool_backward(&arg, &[1.0, 2.0], &mut dx);
        assert_eq!(dx, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn odd_sizes_floor_when_pooling() {
        let spec = LayerSpec::MaxPool { size: 2 };
        assert_eq!(spec.output_shape(Shape3::new(8, 25, 300)).unwrap(), Shape3::new(8, 12, 150));
        assert!(spec.output_shape(Shape3::new(1, 1, 4)).is_err());
        assert!(LayerSpec::Conv { out_channels: 4, kernel: 2 }
            .output_shape(Shape3::new(1, 4, 4))
            .is_err());
    }

    #[test]
    fn gap_and_dense() {
        let s = Shape3::new(2, 1, 3);
        let mut y = [0.0; 2];
        gap_forward(&[1.0, 2.0, 3.0, 4.0, 4.0, 4.0], s, &mut y);
        assert_eq!(y, [2.0, 4.0]);
        let mut out = [0.0];
        dense_forward(&[2.0, 4.0], &[0.5, -1.0], &[3.0], &mut out);
        assert_eq!(out, [0.0]);
    }
}
