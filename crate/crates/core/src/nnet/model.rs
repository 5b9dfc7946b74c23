use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::tensor::{map_image, Tensor4};
use super::{denormalize, DEFAULT_FS_REF};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::stmap::SpatialTemporalMap;

/// Fixed affine map from the last layer's output to normalized HR, centred
/// on the generator HR range so a freshly initialized model starts in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub offset: f64,
    pub scale: f64,
}

impl Default for OutputHead {
    fn default() -> Self {
        Self {
            offset: 96.5,
            scale: 50.0,
        }
    }
}

/// Subtracted from every map value before the first layer.
pub const DEFAULT_INPUT_OFFSET: f64 = 0.5;

/// conv3x3(8) / ReLU / pool2 / conv3x3(16) / ReLU / pool2 / GAP / dense(1).
pub fn compact_cnn() -> Vec<LayerSpec> {
    cnn(8, 16)
}

/// The same stack with 16 and 32 channels.
pub fn wide_cnn() -> Vec<LayerSpec> {
    cnn(16, 32)
}

fn cnn(c1: usize, c2: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            out_channels: c1,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { size: 2 },
        LayerSpec::Conv {
            out_channels: c2,
            kernel: 3,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool { size: 2 },
        LayerSpec::GlobalAvgPool,
        LayerSpec::Dense { out: 1 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ParamSlot {
    pub w: usize,
    pub nw: usize,
    pub b: usize,
    pub nb: usize,
}

impl ParamSlot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.w..self.b + self.nb
    }
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    pub acts: Vec<Vec<f64>>,
    pub args: Vec<Vec<usize>>,
}

impl Cache {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("output activation")[0]
    }
}

/// Feed-forward regressor from a `C x n x T` map image to one normalized HR.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input: Shape3,
    specs: Vec<LayerSpec>,
    shapes: Vec<Shape3>,
    slots: Vec<ParamSlot>,
    params: Vec<f64>,
    input_offset: f64,
    head: OutputHead,
    fs_ref: f64,
}

fn layout(input: Shape3, specs: &[LayerSpec]) -> Result<(Vec<Shape3>, Vec<ParamSlot>, usize)> {
    if specs.is_empty() {
        return Err(Error::Config("architecture has no layers".into()));
    }
    if input.is_empty() {
        return Err(Error::Config(format!("empty model input {input:?}")));
    }
    let mut shapes = vec![input];
    let mut slots = Vec::with_capacity(specs.len());
    let mut at = 0;
    for spec in specs {
        let s = *shapes.last().unwrap();
        let (nw, nb) = spec.param_counts(s);
        slots.push(ParamSlot {
            w: at,
            nw,
            b: at + nw,
            nb,
        });
        at += nw + nb;
        shapes.push(spec.output_shape(s)?);
    }
    if shapes.last() != Some(&Shape3::new(1, 1, 1)) {
        return Err(Error::Config(format!(
            "architecture must end in a single output, got {:?}",
            shapes.last().unwrap()
        )));
    }
    Ok((shapes, slots, at))
}

impl Model {
    /// He-normal weights (std `sqrt(2 / fan_in)`), zero biases, drawn from
    /// `seed`.
    pub fn new(input: Shape3, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let (shapes, slots, n) = layout(input, specs)?;
        let mut params = vec![0.0; n];
        for (i, spec) in specs.iter().enumerate() {
            let slot = slots[i];
            if slot.nw == 0 {
                continue;
            }
            let std = (2.0 / spec.fan_in(shapes[i]) as f64).sqrt();
            let mut rng = stream_rng(seed, stream::INIT, i as u64);
            for w in &mut params[slot.w..slot.w + slot.nw] {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(Self {
            input,
            specs: specs.to_vec(),
            shapes,
            slots,
            params,
            input_offset: DEFAULT_INPUT_OFFSET,
            head: OutputHead::default(),
            fs_ref: DEFAULT_FS_REF,
        })
    }

    /// Rebuilds a model from stored parts (checkpoint loading).
    pub fn from_parts(
        input: Shape3,
        specs: &[LayerSpec],
        params: Vec<f64>,
        input_offset: f64,
        head: OutputHead,
        fs_ref: f64,
    ) -> Result<Self> {
        let (shapes, slots, n) = layout(input, specs)?;
        if params.len() != n {
            return Err(Error::Shape(format!(
                "architecture has {n} parameters, {} given",
                params.len()
            )));
        }
        if !(fs_ref > 0.0) || !head.scale.is_finite() || !input_offset.is_finite() {
            return Err(Error::Config("invalid model constants".into()));
        }
        Ok(Self {
            input,
            specs: specs.to_vec(),
            shapes,
            slots,
            params,
            input_offset,
            head,
            fs_ref,
        })
    }

    /// Input shape for maps of this geometry.
    pub fn input_for(map: &SpatialTemporalMap) -> Shape3 {
        Shape3::new(map.channels(), map.blocks(), map.frames())
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn set_head(&mut self, head: OutputHead) {
        self.head = head;
    }

    pub fn input_offset(&self) -> f64 {
        self.input_offset
    }

    pub fn set_input_offset(&mut self, v: f64) {
        self.input_offset = v;
    }

    pub fn fs_ref(&self) -> f64 {
        self.fs_ref
    }

    pub fn set_fs_ref(&mut self, fs_ref: f64) {
        self.fs_ref = fs_ref;
    }

    /// `(weights, biases)` of layer `i`; empty for parameter-free layers.
    pub fn layer_params(&self, i: usize) -> (&[f64], &[f64]) {
        let s = self.slots[i];
        (&self.params[s.w..s.w + s.nw], &self.params[s.b..s.b + s.nb])
    }

    pub fn layer_params_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.slots[i];
        let (w, b) = self.params[s.w..s.b + s.nb].split_at_mut(s.nw);
        (w, b)
    }

    pub(crate) fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn check_map(&self, map: &SpatialTemporalMap) -> Result<()> {
        let s = Self::input_for(map);
        if s != self.input {
            return Err(Error::Shape(format!(
                "map {}x{}x{} (n x T x C) does not fit model input {}x{}x{}",
                s.h, s.w, s.c, self.input.h, self.input.w, self.input.c
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Cache {
        debug_assert_eq!(x.len(), self.input.len());
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        acts.push(x.iter().map(|v| v - self.input_offset).collect::<Vec<f64>>());
        let mut args = Vec::with_capacity(self.specs.len());
        for (i, spec) in self.specs.iter().enumerate() {
            let (s, so) = (self.shapes[i], self.shapes[i + 1]);
            let xin = &acts[i];
            let mut y = vec![0.0; so.len()];
            let mut arg = Vec::new();
            let (w, b) = self.layer_params(i);
            match *spec {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                } => conv_forward(xin, s, w, b, out_channels, kernel, &mut y),
                LayerSpec::Relu => relu_forward(xin, &mut y),
                LayerSpec::MaxPool { size } => {
                    arg = vec![0; so.len()];
                    maxpool_forward(xin, s, size, &mut y, &mut arg);
                }
                LayerSpec::GlobalAvgPool => gap_forward(xin, s, &mut y),
                LayerSpec::Dense { .. } => dense_forward(xin, w, b, &mut y),
            }
            debug_assert!(y.iter().all(|v| v.is_finite()), "non-finite activation in layer {i}");
            acts.push(y);
            args.push(arg);
        }
        Cache { acts, args }
    }

    /// Adds `d loss / d params` to `grads` given `d loss / d output`, where
    /// output is the normalized HR after the head.
    pub(crate) fn backward(&self, cache: &Cache, d_out: f64, grads: &mut [f64]) {
        let mut dy = vec![d_out * self.head.scale];
        for i in (0..self.specs.len()).rev() {
            let s = self.shapes[i];
            let xin = &cache.acts[i];
            let need_dx = i > 0;
            let mut dx = if need_dx { vec![0.0; s.len()] } else { Vec::new() };
            let slot = self.slots[i];
            match self.specs[i] {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                } => {
                    let (gw, gb) = grads[slot.w..slot.b + slot.nb].split_at_mut(slot.nw);
                    let w = &self.params[slot.w..slot.w + slot.nw];
                    let dx = need_dx.then_some(dx.as_mut_slice());
                    conv_backward(xin, s, w, out_channels, kernel, &dy, gw, gb, dx);
                }
                LayerSpec::Dense { .. } => {
                    let (gw, gb) = grads[slot.w..slot.b + slot.nb].split_at_mut(slot.nw);
                    let w = &self.params[slot.w..slot.w + slot.nw];
                    let dx = need_dx.then_some(dx.as_mut_slice());
                    dense_backward(xin, w, &dy, gw, gb, dx);
                }
                _ if !need_dx => {}
                LayerSpec::Relu => relu_backward(xin, &dy, &mut dx),
                LayerSpec::MaxPool { .. } => maxpool_backward(&cache.args[i], &dy, &mut dx),
                LayerSpec::GlobalAvgPool => gap_backward(s, &dy, &mut dx),
            }
            dy = dx;
        }
    }

    /// Output of the last layer, before the head.
    pub fn forward_raw(&self, image: &[f64]) -> f64 {
        self.forward_cached(image).output()
    }

    /// Normalized HR for a `C x n x T` image.
    pub fn forward_image(&self, image: &[f64]) -> f64 {
        self.head.offset + self.head.scale * self.forward_raw(image)
    }

    /// Normalized HR of one map.
    pub fn forward(&self, map: &SpatialTemporalMap) -> Result<f64> {
        self.check_map(map)?;
        Ok(self.forward_image(&map_image(map)))
    }

    /// Every sample is evaluated on its own; outputs never depend on the
    /// rest of the batch.
    pub fn forward_batch(&self, batch: &Tensor4) -> Result<Vec<f64>> {
        let [n, c, h, w] = batch.dims();
        if Shape3::new(c, h, w) != self.input {
            return Err(Error::Shape(format!(
                "batch sample {c}x{h}x{w} does not fit model input {:?}",
                self.input
            )));
        }
        Ok((0..n).map(|b| self.forward_image(batch.sample(b))).collect())
    }

    /// HR in bpm for a map recorded at the map's frame rate.
    pub fn predict_hr(&self, map: &SpatialTemporalMap) -> Result<f64> {
        Ok(denormalize(self.forward(map)?, map.frame_rate_hz(), self.fs_ref))
    }
}

/// Normalized HR of one map.
pub fn forward(map: &SpatialTemporalMap, model: &Model) -> Result<f64> {
    model.forward(map)
}
