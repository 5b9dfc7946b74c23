use crate::error::{Error, Result};
use crate::stmap::SpatialTemporalMap;

/// Dense `(batch, channels, height, width)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "tensor {dims:?} given {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    /// Stacks maps as images: channel `c`, row = block, column = frame.
    pub fn from_maps(maps: &[&SpatialTemporalMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidInput("no maps to stack".into()))?;
        let (n, t, c) = (first.blocks(), first.frames(), first.channels());
        let mut data = Vec::with_capacity(maps.len() * n * t * c);
        for m in maps {
            if (m.blocks(), m.frames(), m.channels()) != (n, t, c) {
                return Err(Error::Shape(format!(
                    "map {}x{}x{} stacked with {n}x{t}x{c}",
                    m.blocks(),
                    m.frames(),
                    m.channels()
                )));
            }
            data.extend(map_image(m));
        }
        Self::new([maps.len(), c, n, t], data)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One map laid out channel-major as a `C x n x T` image.
pub(crate) fn map_image(m: &SpatialTemporalMap) -> Vec<f64> {
    let (n, t, c) = (m.blocks(), m.frames(), m.channels());
    let v = m.values();
    let mut out = vec![0.0; n * t * c];
    for b in 0..n {
        for k in 0..t {
            for ch in 0..c {
                out[(ch * n + b) * t + k] = v[(b * t + k) * c + ch];
            }
        }
    }
    out
}
