use std::path::{Path, PathBuf};

use pulsebench::formats::{
    predictions_csv, read_hr_table, write_atomic, write_fseq, write_frame_dir,
    write_landmarks_csv, write_pulse_csv, Level,
};
use pulsebench::metrics::{pair_rows, HrReport};
use pulsebench::nnet::{load_checkpoint, save_checkpoint, CheckpointMeta, Sample};
use pulsebench::pipeline::{
    estimate_maps, estimate_video, labelled_samples, load_video, read_map_set, synth_map_set,
    train_model, video_map_set, write_map_set, Method, PipelineConfig,
};
use pulsebench::stmap::ColorSpace;
use pulsebench::synth::{compression_study, gen_video, sample_config, suite_template, SynthConfig};
use pulsebench::{Error, Result};

use crate::{EvalArgs, EvalLevel, EstimateArgs, StmapArgs, StudyArgs, SynthMapArgs, SynthVideoArgs, TrainArgs, VideoArgs};

fn required(arg: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    arg.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("missing --{flag} (or paths.{flag} in the config)")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes to `path`, or prints when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Video {
    seq: pulsebench::stmap::FrameSequence,
    track: pulsebench::stmap::LandmarkTrack,
    id: String,
}

fn read_video_args(cfg: &PipelineConfig, a: VideoArgs) -> Result<Video> {
    let frames = required(a.frames, &cfg.paths.frames, "frames")?;
    let landmarks = required(a.landmarks, &cfg.paths.landmarks, "landmarks")?;
    let (seq, track) = load_video(&frames, &landmarks, a.fps.unwrap_or(cfg.fps))?;
    let id = match a.video_id {
        Some(id) => id,
        None => frames
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into()),
    };
    Ok(Video { seq, track, id })
}

pub fn stmap(cfg: &PipelineConfig, a: StmapArgs) -> Result<()> {
    let out = required(a.out, &cfg.paths.out, "out")?;
    let v = read_video_args(cfg, a.video)?;
    let entries = video_map_set(&v.seq, &v.track, cfg, &v.id, a.hr)?;
    write_map_set(&out, &entries)?;
    eprintln!(
        "{}: {} clip maps ({} channel(s)) written to {}",
        v.id,
        entries.len(),
        entries[0].map.channels(),
        out.display()
    );
    Ok(())
}

pub fn estimate(cfg: &PipelineConfig, a: EstimateArgs) -> Result<()> {
    let method = a.method.unwrap_or(cfg.method);
    let cfg = PipelineConfig {
        method,
        ..cfg.clone()
    };
    let model = match (method, a.checkpoint.or_else(|| cfg.paths.checkpoint.clone())) {
        (Method::Cnn, Some(p)) => Some(load_checkpoint(&p)?.0),
        (Method::Cnn, None) => {
            return Err(Error::Config("method cnn needs --checkpoint".into()));
        }
        _ => None,
    };
    let rows = match a.maps {
        Some(dir) => {
            let model = model
                .as_ref()
                .ok_or_else(|| Error::Config("--maps input needs --method cnn".into()))?;
            estimate_maps(&read_map_set(&dir)?, model)?
        }
        None => {
            let v = read_video_args(&cfg, a.video)?;
            estimate_video(&v.seq, &v.track, &cfg, model.as_ref(), &v.id)?
        }
    };
    emit(a.out.as_deref(), &predictions_csv(&rows)?)
}

fn samples(dir: &Option<PathBuf>) -> Result<Vec<Sample>> {
    match dir {
        Some(d) => labelled_samples(&read_map_set(d)?),
        None => Ok(Vec::new()),
    }
}

pub fn train(cfg: &PipelineConfig, a: TrainArgs) -> Result<()> {
    let out = required(a.out, &cfg.paths.checkpoint, "out")?;
    let mut cfg = cfg.clone();
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let synthetic = samples(&a.synthetic)?;
    let real = samples(&a.real)?;
    let validation = samples(&a.val)?;
    let (model, log, plan) = train_model(&cfg, &synthetic, &real, &validation)?;
    save_checkpoint(&out, &model, &CheckpointMeta::new(&model, cfg.seed, plan))?;
    if let Some(p) = a.log {
        let mut json = serde_json::to_string_pretty(&log)
            .map_err(|e| Error::InvalidInput(format!("training log: {e}")))?;
        json.push('\n');
        write_atomic(&p, json.as_bytes())?;
    }
    if let Some(last) = log.epochs.last() {
        eprintln!(
            "trained {} epochs, final train MAE {:.3} bpm{}",
            log.epochs.len(),
            last.train_mae_bpm,
            last.val_mae_bpm
                .map(|v| format!(", validation MAE {v:.3} bpm"))
                .unwrap_or_default()
        );
    }
    Ok(())
}

pub fn synth_video(cfg: &PipelineConfig, a: SynthVideoArgs) -> Result<()> {
    let mut sc = SynthConfig {
        seed: cfg.seed,
        ..cfg.synth.clone()
    };
    if let Some(hr) = a.hr {
        sc.hr_bpm = hr;
    }
    if let Some(d) = a.duration {
        sc.duration_sec = d;
    }
    if a.gray {
        sc.color = ColorSpace::Gray;
    }
    let (seq, track, bvp) = gen_video(&sc)?;
    create_dir(&a.out)?;
    if a.png {
        write_frame_dir(&a.out.join("frames"), &seq)?;
    } else {
        write_fseq(&a.out.join("frames.fseq"), &seq)?;
    }
    write_landmarks_csv(&a.out.join("landmarks.csv"), &track)?;
    write_pulse_csv(&a.out.join("bvp.csv"), &bvp)?;
    write_atomic(
        &a.out.join("truth.csv"),
        format!("video_id,hr_bpm\n{},{}\n", a.video_id, sc.hr_bpm).as_bytes(),
    )?;
    eprintln!(
        "{} frames at {} fps, {} bpm, written to {}",
        seq.len(),
        sc.fps,
        sc.hr_bpm,
        a.out.display()
    );
    Ok(())
}

pub fn synth_map(cfg: &PipelineConfig, a: SynthMapArgs) -> Result<()> {
    let mut tpl = cfg.synth.clone();
    if let Some(d) = a.duration {
        tpl.duration_sec = d;
    }
    let set = synth_map_set(&tpl, cfg.grid, a.count, cfg.seed)?;
    write_map_set(&a.out, &set)?;
    eprintln!("{} labelled maps written to {}", set.len(), a.out.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_hr_table(&a.pred)?;
    let truth = read_hr_table(&a.truth)?;
    let level = match a.level {
        EvalLevel::Video => Level::Video,
        EvalLevel::Clip => Level::Clip,
    };
    let report = HrReport::new(pair_rows(&pred, &truth, level)?)?;
    if let Some(p) = &a.csv {
        write_atomic(p, report.rows_csv().as_bytes())?;
    }
    emit(a.json.as_deref(), &report.summary_json())
}

pub fn study(cfg: &PipelineConfig, a: StudyArgs) -> Result<()> {
    let method = match a.method.unwrap_or(Method::from(cfg.study.method)) {
        Method::Cnn => return Err(Error::Config("the study runs classical methods only".into())),
        m => m.classic().unwrap(),
    };
    let n = a.suite.unwrap_or(cfg.study.suite_size);
    let tpl = suite_template();
    let suite: Vec<SynthConfig> = (0..n as u64)
        .map(|i| sample_config(&tpl, cfg.seed + i))
        .collect();
    let ops = if a.ops.is_empty() {
        cfg.study.ops.clone()
    } else {
        a.ops
    };
    let table = compression_study(&suite, &ops, method, &cfg.band, &cfg.stmap_options())?;
    emit(a.out.as_deref(), &table.to_csv())
}
