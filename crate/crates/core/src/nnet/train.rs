use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::layers::LayerSpec;
use super::model::{compact_cnn, Model};
use super::tensor::map_image;
use super::{denormalize, normalize_target, DEFAULT_FS_REF};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{mix, stream, stream_rng};
use crate::stmap::{mask_augment, SpatialTemporalMap, DEFAULT_MASK_LEN, DEFAULT_MASK_PROB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Synthetic,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStage {
    pub dataset: Dataset,
    pub epochs: usize,
    /// Layer indices whose parameters stay fixed in this stage.
    #[serde(default)]
    pub freeze: Vec<usize>,
}

/// Ordered training stages run after seeded initialization (which takes the
/// place of generic-image pretraining).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStagePlan {
    pub stages: Vec<TrainStage>,
}

impl TrainStagePlan {
    /// Synthetic-map pretraining followed by fine-tuning of all layers on
    /// real maps.
    pub fn three_stage(pretrain_epochs: usize, finetune_epochs: usize) -> Self {
        Self {
            stages: vec![
                TrainStage {
                    dataset: Dataset::Synthetic,
                    epochs: pretrain_epochs,
                    freeze: Vec::new(),
                },
                TrainStage {
                    dataset: Dataset::Real,
                    epochs: finetune_epochs,
                    freeze: Vec::new(),
                },
            ],
        }
    }

    pub fn single(dataset: Dataset, epochs: usize) -> Self {
        Self {
            stages: vec![TrainStage {
                dataset,
                epochs,
                freeze: Vec::new(),
            }],
        }
    }

    pub fn validate(&self, layers: usize) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("training plan has no stages".into()));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if s.epochs == 0 {
                return Err(Error::Config(format!("stage {k} has zero epochs")));
            }
            if let Some(&l) = s.freeze.iter().find(|&&l| l >= layers) {
                return Err(Error::Config(format!(
                    "stage {k} freezes layer {l} but the model has {layers} layers"
                )));
            }
        }
        Ok(())
    }
}

/// A labelled map; its frame rate is the map's own.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub map: SpatialTemporalMap,
    pub hr_bpm: f64,
}

impl Sample {
    pub fn new(map: SpatialTemporalMap, hr_bpm: f64) -> Self {
        Self { map, hr_bpm }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainData<'a> {
    pub synthetic: &'a [Sample],
    pub real: &'a [Sample],
    pub validation: &'a [Sample],
}

impl<'a> TrainData<'a> {
    fn get(&self, d: Dataset) -> &'a [Sample] {
        match d {
            Dataset::Synthetic => self.synthetic,
            Dataset::Real => self.real,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub architecture: Vec<LayerSpec>,
    pub lr: f64,
    /// Epochs for plans built from the config alone.
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub fs_ref: f64,
    pub mask_prob: f64,
    pub mask_len: (usize, usize),
    /// Ends a stage early once the MAE on its own clean data drops below
    /// this many bpm.
    pub stop_below_mae_bpm: Option<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            architecture: compact_cnn(),
            lr: 1e-3,
            epochs: 50,
            batch: 1,
            seed: 0,
            fs_ref: DEFAULT_FS_REF,
            mask_prob: DEFAULT_MASK_PROB,
            mask_len: DEFAULT_MASK_LEN,
            stop_below_mae_bpm: None,
            exec: Exec::Sequential,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be at least 1".into()));
        }
        if !(self.fs_ref > 0.0) {
            return Err(Error::Config("fs_ref must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::Config(format!("mask_prob {} not in [0, 1]", self.mask_prob)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub stage: usize,
    pub epoch: usize,
    /// Mean absolute error over the epoch's (augmented) samples, before each
    /// sample's update.
    pub train_mae_bpm: f64,
    pub val_mae_bpm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Validation MAE before the first update of each stage.
    pub initial_val_mae_bpm: Vec<Option<f64>>,
}

/// Mean absolute HR error in bpm of `model` on clean (unmasked) samples.
pub fn evaluate_mae(model: &Model, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("no samples to evaluate".into()));
    }
    let mut sum = 0.0;
    for s in samples {
        sum += (model.predict_hr(&s.map)? - s.hr_bpm).abs();
    }
    Ok(sum / samples.len() as f64)
}

/// Initializes a model for the first stage's data and runs the plan.
pub fn train(
    plan: &TrainStagePlan,
    data: &TrainData,
    cfg: &RegressorConfig,
) -> Result<(Model, TrainLog)> {
    let first = plan
        .stages
        .first()
        .ok_or_else(|| Error::Config("training plan has no stages".into()))?;
    let sample = data
        .get(first.dataset)
        .first()
        .ok_or_else(|| Error::Config(format!("no {:?} training data", first.dataset)))?;
    let mut model = Model::new(Model::input_for(&sample.map), &cfg.architecture, cfg.seed)?;
    model.set_fs_ref(cfg.fs_ref);
    train_from(model, plan, data, cfg)
}

/// Runs the plan starting from `model`. Each stage gets a fresh optimizer.
pub fn train_from(
    mut model: Model,
    plan: &TrainStagePlan,
    data: &TrainData,
    cfg: &RegressorConfig,
) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    plan.validate(model.specs().len())?;
    for s in data.synthetic.iter().chain(data.real).chain(data.validation) {
        model.check_map(&s.map)?;
    }
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut log = TrainLog::default();
    let mut global_epoch = 0u64;
    let val = |m: &Model| -> Result<Option<f64>> {
        if data.validation.is_empty() {
            Ok(None)
        } else {
            evaluate_mae(m, data.validation).map(Some)
        }
    };

    for (k, stage) in plan.stages.iter().enumerate() {
        let set = data.get(stage.dataset);
        if set.is_empty() {
            return Err(Error::Config(format!(
                "stage {k} has no {:?} training data",
                stage.dataset
            )));
        }
        log.initial_val_mae_bpm.push(val(&model)?);
        let mut frozen = vec![false; model.param_count()];
        for &l in &stage.freeze {
            frozen[model.slots()[l].range()].fill(true);
        }
        let mut state = AdamState::new(model.param_count());
        for epoch in 0..stage.epochs {
            let order = shuffled(set.len(), cfg.seed, global_epoch);
            let mut abs_err = 0.0;
            for chunk in order.chunks(cfg.batch) {
                let scale = 1.0 / chunk.len() as f64;
                let per_sample = cfg.exec.try_map(chunk.len(), |j| {
                    let idx = chunk[j];
                    let s = &set[idx];
                    let map = if cfg.mask_prob > 0.0 {
                        let seed = mix(cfg.seed, (global_epoch << 32) | idx as u64);
                        mask_augment(&s.map, seed, cfg.mask_prob, cfg.mask_len)?
                    } else {
                        s.map.clone()
                    };
                    let fs = map.frame_rate_hz();
                    let y = normalize_target(s.hr_bpm, fs, cfg.fs_ref);
                    let cache = model.forward_cached(&map_image(&map));
                    let out = model.head().offset + model.head().scale * cache.output();
                    let d = (out - y).signum() * if out == y { 0.0 } else { scale };
                    let mut g = vec![0.0; model.param_count()];
                    model.backward(&cache, d, &mut g);
                    Ok::<_, Error>((g, denormalize((out - y).abs(), fs, cfg.fs_ref)))
                })?;
                let mut grads = vec![0.0; model.param_count()];
                for (g, e) in &per_sample {
                    for (a, b) in grads.iter_mut().zip(g) {
                        *a += b;
                    }
                    abs_err += e;
                }
                for (g, &f) in grads.iter_mut().zip(&frozen) {
                    if f {
                        *g = 0.0;
                    }
                }
                adam_step(model.params_mut(), &grads, &mut state, &adam)?;
            }
            log.epochs.push(EpochLog {
                stage: k,
                epoch,
                train_mae_bpm: abs_err / set.len() as f64,
                val_mae_bpm: val(&model)?,
            });
            global_epoch += 1;
            if let Some(th) = cfg.stop_below_mae_bpm {
                if evaluate_mae(&model, set)? < th {
                    break;
                }
            }
        }
    }
    Ok((model, log))
}

/// Fisher-Yates permutation of `0..n` for one epoch.
fn shuffled(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = stream_rng(seed, stream::SHUFFLE, epoch);
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPrediction {
    pub clip_hr_bpm: Vec<f64>,
    /// Mean of the clip HRs.
    pub video_hr_bpm: f64,
}

/// Per-clip HRs of one video's clip maps and their mean.
pub fn predict_video(maps: &[SpatialTemporalMap], model: &Model) -> Result<VideoPrediction> {
    if maps.is_empty() {
        return Err(Error::InvalidInput("no clips to predict".into()));
    }
    let clip_hr_bpm = maps
        .iter()
        .map(|m| model.predict_hr(m))
        .collect::<Result<Vec<_>>>()?;
    let video_hr_bpm = clip_hr_bpm.iter().sum::<f64>() / clip_hr_bpm.len() as f64;
    Ok(VideoPrediction {
        clip_hr_bpm,
        video_hr_bpm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stmap::Grid;
    use crate::synth::{gen_synth_map, sample_config, SynthConfig};

    fn synth_set(n: usize, seed0: u64, t_sec: f64) -> Vec<Sample> {
        let tpl = SynthConfig {
            duration_sec: t_sec,
            noise_sigma: 0.5,
            ..SynthConfig::default()
        };
        (0..n as u64)
            .map(|s| {
                let (map, hr) = gen_synth_map(&sample_config(&tpl, seed0 + s), Grid::new(5, 5)).unwrap();
                Sample::new(map, hr)
            })
            .collect()
    }

    fn quick_cfg(seed: u64) -> RegressorConfig {
        RegressorConfig {
            seed,
            mask_len: (2, 6),
            ..RegressorConfig::default()
        }
    }

    #[test]
    fn identical_seeds_identical_curves() {
        let data = synth_set(4, 0, 3.0);
        let td = TrainData {
            synthetic: &data,
            validation: &data[..2],
            ..TrainData::default()
        };
        let plan = TrainStagePlan::single(Dataset::Synthetic, 3);
        let (a, la) = train(&plan, &td, &quick_cfg(5)).unwrap();
        let (b, lb) = train(&plan, &td, &quick_cfg(5)).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
        let (_, lc) = train(&plan, &td, &quick_cfg(6)).unwrap();
        assert_ne!(la, lc);
        assert_eq!(la.epochs.len(), 3);
        assert!(la.epochs.iter().all(|e| e.val_mae_bpm.is_some()));
    }

    #[test]
    fn parallel_batches_match_sequential() {
        let data = synth_set(4, 10, 3.0);
        let td = TrainData {
            synthetic: &data,
            ..TrainData::default()
        };
        let plan = TrainStagePlan::single(Dataset::Synthetic, 2);
        let cfg = RegressorConfig {
            batch: 3,
            ..quick_cfg(1)
        };
        let (a, _) = train(&plan, &td, &cfg).unwrap();
        let (b, _) = train(&plan, &td, &RegressorConfig { exec: Exec::Parallel, ..cfg }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_layers_do_not_move() {
        let data = synth_set(3, 20, 3.0);
        let td = TrainData {
            synthetic: &data,
            real: &data,
            ..TrainData::default()
        };
        let mut plan = TrainStagePlan::three_stage(1, 2);
        plan.stages[1].freeze = vec![0, 3];
        let (pre, _) = train(&TrainStagePlan::single(Dataset::Synthetic, 1), &td, &quick_cfg(2)).unwrap();
        let (post, log) = train(&plan, &td, &quick_cfg(2)).unwrap();
        assert_eq!(pre.layer_params(0), post.layer_params(0));
        assert_eq!(pre.layer_params(3), post.layer_params(3));
        assert_ne!(pre.layer_params(7), post.layer_params(7));
        assert_eq!(log.initial_val_mae_bpm.len(), 2);
    }

    #[test]
    fn empty_data_and_bad_plans_rejected() {
        let data = synth_set(2, 0, 3.0);
        let td = TrainData {
            synthetic: &data,
            ..TrainData::default()
        };
        let cfg = quick_cfg(0);
        assert!(matches!(
            train(&TrainStagePlan::three_stage(1, 1), &td, &cfg),
            Err(Error::Config(_))
        ));
        assert!(train(&TrainStagePlan { stages: vec![] }, &td, &cfg).is_err());
        let mut plan = TrainStagePlan::single(Dataset::Synthetic, 1);
        plan.stages[0].freeze = vec![42];
        assert!(train(&plan, &td, &cfg).is_err());
        let empty = TrainData::default();
        assert!(train(&TrainStagePlan::single(Dataset::Synthetic, 1), &empty, &cfg).is_err());
    }

    #[test]
    fn mismatched_maps_rejected() {
        let a = synth_set(1, 0, 3.0);
        let b = synth_set(1, 0, 4.0);
        let mixed = vec![a[0].clone(), b[0].clone()];
        let td = TrainData {
            synthetic: &mixed,
            ..TrainData::default()
        };
        let r = train(&TrainStagePlan::single(Dataset::Synthetic, 1), &td, &quick_cfg(0));
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn video_prediction_is_clip_mean() {
        let maps: Vec<_> = synth_set(2, 0, 3.0).into_iter().map(|s| s.map).collect();
        let mut m = Model::new(Model::input_for(&maps[0]), &compact_cnn(), 0).unwrap();
        let last = m.specs().len() - 1;
        let (w, b) = m.layer_params_mut(last);
        w.fill(0.0);
        b[0] = (70.0 - 96.5) / 50.0;
        let one = predict_video(&maps[..1], &m).unwrap();
        assert_eq!(one.video_hr_bpm, one.clip_hr_bpm[0]);
        let two = predict_video(&maps, &m).unwrap();
        assert!((two.video_hr_bpm - 70.0).abs() < 1e-9);
        assert!(predict_video(&[], &m).is_err());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut p = shuffled(50, 3, 7);
        assert_ne!(p, (0..50).collect::<Vec<_>>());
        p.sort();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
