use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layers::{LayerSpec, Shape3};
use super::model::{Model, OutputHead};
use super::train::TrainStagePlan;
use crate::error::{Error, Result};
use crate::formats::{read_file, read_text, write_atomic, ByteReader, ByteWriter};

const MAGIC: &[u8; 4] = b"RNET";
const VERSION: u32 = 1;

/// Sidecar metadata stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub seed: u64,
    pub fs_ref: f64,
    pub stages: TrainStagePlan,
    pub architecture: Vec<LayerSpec>,
    pub input: Shape3,
}

impl CheckpointMeta {
    pub fn new(model: &Model, seed: u64, stages: TrainStagePlan) -> Self {
        Self {
            format_version: VERSION,
            seed,
            fs_ref: model.fs_ref(),
            stages,
            architecture: model.specs().to_vec(),
            input: model.input_shape(),
        }
    }
}

/// `weights.rnet` → `weights.rnet.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn encode_spec(w: &mut ByteWriter, spec: &LayerSpec) -> Result<()> {
    let (tag, a, b) = match *spec {
        LayerSpec::Conv {
            out_channels,
            kernel,
        } => (0, out_channels, kernel),
        LayerSpec::Relu => (1, 0, 0),
        LayerSpec::MaxPool { size } => (2, size, 0),
        LayerSpec::GlobalAvgPool => (3, 0, 0),
        LayerSpec::Dense { out } => (4, out, 0),
    };
    w.u8(tag);
    w.dim(a)?;
    w.dim(b)
}

fn decode_spec(r: &mut ByteReader) -> Result<LayerSpec> {
    let tag = r.u8()?;
    let a = r.dim()?;
    let b = r.dim()?;
    Ok(match tag {
        0 => LayerSpec::Conv {
            out_channels: a,
            kernel: b,
        },
        1 => LayerSpec::Relu,
        2 => LayerSpec::MaxPool { size: a },
        3 => LayerSpec::GlobalAvgPool,
        4 => LayerSpec::Dense { out: a },
        t => return Err(r.error(format!("unknown layer tag {t}"))),
    })
}

/// Weights are stored as `f32`.
pub fn checkpoint_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut w = ByteWriter::header(MAGIC, VERSION);
    let s = model.input_shape();
    w.dim(s.c)?;
    w.dim(s.h)?;
    w.dim(s.w)?;
    w.f64(model.input_offset());
    w.f64(model.head().offset);
    w.f64(model.head().scale);
    w.f64(model.fs_ref());
    w.dim(model.specs().len())?;
    for spec in model.specs() {
        encode_spec(&mut w, spec)?;
    }
    w.u64(model.param_count() as u64);
    for &p in model.params() {
        w.f32(p as f32);
    }
    Ok(w.buf)
}

pub fn checkpoint_from_bytes(bytes: &[u8], path: &Path) -> Result<Model> {
    let mut r = ByteReader::open(bytes, path, MAGIC, VERSION)?;
    let input = Shape3::new(r.dim()?, r.dim()?, r.dim()?);
    let input_offset = r.f64()?;
    let head = OutputHead {
        offset: r.f64()?,
        scale: r.f64()?,
    };
    let fs_ref = r.f64()?;
    let n = r.dim()?;
    let specs = (0..n)
        .map(|_| decode_spec(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let np = r.u64()? as usize;
    if r.remaining() != np.saturating_mul(4) {
        return Err(r.error(format!("{np} weights declared, {} bytes follow", r.remaining())));
    }
    let params = (0..np)
        .map(|_| r.f32().map(f64::from))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Model::from_parts(input, &specs, params, input_offset, head, fs_ref)
        .map_err(|e| r.error(e.to_string()))
}

/// Writes the weights to `path` and the metadata to [`meta_path`].
pub fn save_checkpoint(path: &Path, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(model)?)?;
    let mut json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::InvalidInput(format!("checkpoint metadata: {e}")))?;
    json.push('\n');
    write_atomic(&meta_path(path), json.as_bytes())
}

/// Loads weights and metadata; the two must describe the same network.
pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let model = checkpoint_from_bytes(&read_file(path)?, path)?;
    let mp = meta_path(path);
    let meta: CheckpointMeta = serde_json::from_str(&read_text(&mp)?)
        .map_err(|e| Error::format(&mp, e.to_string()))?;
    if meta.format_version != VERSION {
        return Err(Error::format(
            &mp,
            format!("unsupported version {}", meta.format_version),
        ));
    }
    if meta.architecture != model.specs() || meta.input != model.input_shape() || meta.fs_ref != model.fs_ref()
    {
        return Err(Error::format(&mp, "metadata does not match the weights file"));
    }
    Ok((model, meta))
}
