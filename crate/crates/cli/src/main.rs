use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pulsebench::pipeline::{Method, PipelineConfig};
use pulsebench::synth::DegradeOp;
use pulsebench::Error;

mod commands;

/// Remote heart-rate estimation from face video.
#[derive(Parser, Debug)]
#[command(name = "pulsebench", version)]
struct Cli {
    /// Pipeline settings (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "PULSEBENCH_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut a video into clip maps (one STMP per clip plus index.csv).
    Stmap(StmapArgs),
    /// Estimate HR per clip and per video.
    Estimate(EstimateArgs),
    /// Train the CNN regressor on labelled map directories.
    Train(TrainArgs),
    /// Generate synthetic videos or maps.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Classical-method accuracy under resizing and compression.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct VideoArgs {
    /// FSEQ file or directory of numbered PNG/PGM frames.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Landmark CSV.
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Frame rate of image directories.
    #[arg(long)]
    fps: Option<f64>,
    /// Defaults to the file name of the frames.
    #[arg(long)]
    video_id: Option<String>,
}

#[derive(Args, Debug)]
struct StmapArgs {
    #[command(flatten)]
    video: VideoArgs,
    /// HR label written to the index.
    #[arg(long)]
    hr: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    video: VideoArgs,
    /// Map directory written by `stmap` or `synth map` (cnn only).
    #[arg(long, conflicts_with_all = ["frames", "landmarks"])]
    maps: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Predictions CSV; printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labelled synthetic maps (pretraining).
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Labelled real maps (fine-tuning).
    #[arg(long)]
    real: Option<PathBuf>,
    /// Labelled validation maps.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Checkpoint path; metadata goes to `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch loss curve as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// One rendered face video with landmarks and ground truth.
    Video(SynthVideoArgs),
    /// Labelled maps generated directly from the pulse model.
    Map(SynthMapArgs),
}

#[derive(Args, Debug)]
struct SynthVideoArgs {
    #[arg(long)]
    hr: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Single-channel (NIR-like) video.
    #[arg(long)]
    gray: bool,
    /// Write PNG frames instead of one FSEQ file.
    #[arg(long)]
    png: bool,
    #[arg(long, default_value = "synth")]
    video_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthMapArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalLevel {
    Video,
    Clip,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalLevel::Video)]
    level: EvalLevel,
    /// Paired rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON; printed when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Number of suite videos.
    #[arg(long)]
    suite: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Degradation, e.g. `resize:0.6667`, `quantize:5`, `frame_drop:0.1`;
    /// repeatable. Defaults to the config's list.
    #[arg(long = "op", value_parser = parse_op)]
    ops: Vec<DegradeOp>,
    /// Table CSV; printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_op(s: &str) -> Result<DegradeOp, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_MISSING_INPUT: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_USAGE: u8 = 64;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            EXIT_MISSING_INPUT
        }
        Error::Shape(_) => EXIT_MISMATCH,
        Error::Config(_) => EXIT_USAGE,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> pulsebench::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> pulsebench::Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Stmap(a) => commands::stmap(&cfg, a),
        Command::Estimate(a) => commands::estimate(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Synth(SynthCommand::Video(a)) => commands::synth_video(&cfg, a),
        Command::Synth(SynthCommand::Map(a)) => commands::synth_map(&cfg, a),
        Command::Eval(a) => commands::eval(a),
        Command::Study(a) => commands::study(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
