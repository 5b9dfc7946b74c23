use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classic::ClassicMethod;
use crate::error::{Error, Result};
use crate::formats::read_text;
use crate::nnet::{RegressorConfig, TrainStagePlan};
use crate::signal::BandConfig;
use crate::stmap::{Grid, MapColor, StmapOptions, DEFAULT_SMOOTH_WINDOW, DEFAULT_STRIDE, DEFAULT_WINDOW};
use crate::synth::{DegradeOp, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Green,
    Chrom,
    Pos,
    Cnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Green => "green",
            Method::Chrom => "chrom",
            Method::Pos => "pos",
            Method::Cnn => "cnn",
        }
    }

    pub fn classic(self) -> Option<ClassicMethod> {
        match self {
            Method::Green => Some(ClassicMethod::Green),
            Method::Chrom => Some(ClassicMethod::Chrom),
            Method::Pos => Some(ClassicMethod::Pos),
            Method::Cnn => None,
        }
    }
}

impl From<ClassicMethod> for Method {
    fn from(m: ClassicMethod) -> Self {
        match m {
            ClassicMethod::Green => Method::Green,
            ClassicMethod::Chrom => Method::Chrom,
            ClassicMethod::Pos => Method::Pos,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(Method::Cnn),
            other => other.parse::<ClassicMethod>().map(Method::from).map_err(|_| {
                Error::Config(format!("unknown method `{other}`, expected green, chrom, pos or cnn"))
            }),
        }
    }
}

/// Map channels: YUV block means of color video, or the raw intensity of a
/// single channel. Under `RawGray` color frames are first reduced to luma.
/// Gray (NIR) input always gives one raw channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ColorMode {
    #[default]
    #[serde(alias = "yuv")]
    Yuv,
    #[serde(alias = "rawgray")]
    RawGray,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePaths {
    pub frames: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub suite_size: usize,
    pub method: ClassicMethod,
    pub ops: Vec<DegradeOp>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            suite_size: 20,
            method: ClassicMethod::Chrom,
            ops: vec![
                DegradeOp::Resize { scale: 2.0 / 3.0 },
                DegradeOp::Quantize { quality: 90 },
                DegradeOp::Quantize { quality: 50 },
                DegradeOp::Quantize { quality: 20 },
                DegradeOp::Quantize { quality: 5 },
            ],
        }
    }
}

/// Every setting a command may need. Files are TOML or JSON, chosen by
/// extension; missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_frames: usize,
    pub stride_frames: usize,
    pub grid: Grid,
    pub band: BandConfig,
    pub color: ColorMode,
    pub method: Method,
    /// Master seed; also used as the training seed.
    pub seed: u64,
    /// Frame rate assumed for image directories.
    pub fps: f64,
    pub smooth_window: usize,
    pub train: RegressorConfig,
    /// Training stages; by default pretraining on synthetic maps, followed
    /// by fine-tuning when real maps are given.
    pub plan: Option<TrainStagePlan>,
    /// Template for generated videos and maps.
    pub synth: SynthConfig,
    pub study: StudySettings,
    pub paths: PipelinePaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_frames: DEFAULT_WINDOW,
            stride_frames: DEFAULT_STRIDE,
            grid: Grid::default(),
            band: BandConfig::default(),
            color: ColorMode::Yuv,
            method: Method::Chrom,
            seed: 0,
            fps: 30.0,
            smooth_window: DEFAULT_SMOOTH_WINDOW,
            train: RegressorConfig::default(),
            plan: None,
            synth: SynthConfig {
                duration_sec: DEFAULT_WINDOW as f64 / 30.0,
                ..SynthConfig::default()
            },
            study: StudySettings::default(),
            paths: PipelinePaths::default(),
        }
    }
}

enum Syntax {
    Toml,
    Json,
}

fn syntax(path: &Path) -> Result<Syntax> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Ok(Syntax::Toml),
        Some("json") => Ok(Syntax::Json),
        _ => Err(Error::Config(format!(
            "{}: config files must end in .toml or .json",
            path.display()
        ))),
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames == 0 || self.stride_frames == 0 {
            return Err(Error::Config("window and stride must be positive".into()));
        }
        if self.grid.blocks() == 0 {
            return Err(Error::Config("grid must have at least one block".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.smooth_window % 2 == 0 {
            return Err(Error::Config(format!(
                "smooth_window must be odd, got {}",
                self.smooth_window
            )));
        }
        self.band.validate()?;
        self.train.validate()?;
        for op in &self.study.ops {
            op.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        match syntax(path)? {
            Syntax::Toml => Self::from_toml(&text),
            Syntax::Json => Self::from_json(&text),
        }
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = match syntax(path)? {
            Syntax::Toml => self.to_toml()?,
            Syntax::Json => self.to_json()?,
        };
        crate::formats::write_atomic(path, text.as_bytes())
    }

    /// Training settings with the master seed applied.
    pub fn regressor(&self) -> RegressorConfig {
        RegressorConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn stmap_options(&self) -> StmapOptions {
        StmapOptions {
            grid: self.grid,
            color: MapColor::Yuv,
            ..StmapOptions::default()
        }
    }
}
