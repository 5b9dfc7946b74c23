//! CNN regressor from spatial-temporal maps to heart rate.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, meta_path, save_checkpoint,
    CheckpointMeta,
};
pub use gradcheck::{gradient_check, GradCheck, FULL_CHECK_LIMIT};
pub use layers::{LayerSpec, Shape3};
pub use model::{compact_cnn, forward, wide_cnn, Model, OutputHead, DEFAULT_INPUT_OFFSET};
pub use tensor::Tensor4;
pub use train::{
    evaluate_mae, predict_video, train, train_from, Dataset, EpochLog, RegressorConfig, Sample,
    TrainData, TrainLog, TrainStage, TrainStagePlan, VideoPrediction,
};

use crate::error::{Error, Result};

/// Frame rate the regression target is expressed at.
pub const DEFAULT_FS_REF: f64 = 30.0;

/// HR at frame rate `fs` rescaled to the reference rate: the target then
/// depends on the pulse period in frames, which is what the map shows.
pub fn normalize_target(hr_bpm: f64, fs: f64, fs_ref: f64) -> f64 {
    hr_bpm * fs_ref / fs
}

pub fn denormalize(y: f64, fs: f64, fs_ref: f64) -> f64 {
    y * fs / fs_ref
}

/// Mean absolute difference.
pub fn l1_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "l1 loss over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / pred.len() as f64)
}
