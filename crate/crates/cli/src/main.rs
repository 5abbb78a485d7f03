mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evkit::emulator::EmulatorConfig;
use evkit::io::WindowConfig;
use evkit::repr::TieVariant;
use evkit::toyml::model::GeneratorObjective;
use evkit::toyml::{EncoderMode, OptimizerKind, PretrainLoss, TrainConfig};

/// Event-camera emulation, TIE representations and transfer-learning experiments.
///
/// Results go to stdout (CSV or JSON); logs, the resolved configuration and the
/// seed go to stderr. Exit codes: 0 success, 2 usage or input error, 1 internal
/// error. `EVKIT_THREADS` caps the worker thread count.
#[derive(Debug, Parser)]
#[command(name = "evkit", version)]
pub struct Cli {
    /// Machine-readable output format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,

    /// Log debug detail to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a directory of PGM frames into an event file plus JSON sidecar.
    Emulate(EmulateArgs),
    /// Render an event file (or one window of it) as a TIE image.
    Represent(RepresentArgs),
    /// Generate the synthetic motion-pattern corpus with its manifest.
    Synth(SynthArgs),
    /// Pretrain encoder and decoder on window-to-frame reconstruction.
    Pretrain(PretrainArgs),
    /// Train the sequence classifier under one encoder regime.
    Train(TrainArgs),
    /// Report accuracy and confusion matrix of a trained classifier.
    Eval(EvalArgs),
    /// Summarize any evkit artifact (events, image, tensor, checkpoint, manifest).
    Info(InfoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmulatorArgs {
    /// Nominal contrast threshold C in log-intensity units.
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
    /// Standard deviation of the per-pixel threshold mismatch.
    #[arg(long, default_value_t = 0.03)]
    pub sigma: f64,
    /// Timestamp quantization in microseconds.
    #[arg(long, default_value_t = 1000)]
    pub resolution_us: u64,
    /// Low-pass cutoff frequency in Hz; 0 disables filtering.
    #[arg(long, default_value_t = 30.0)]
    pub cutoff_hz: f64,
    /// Recorded exposure time in microseconds (metadata only).
    #[arg(long, default_value_t = 5000)]
    pub exposure_us: u64,
}

impl EmulatorArgs {
    pub fn config(&self, seed: u64) -> EmulatorConfig {
        EmulatorConfig {
            threshold_c: self.threshold,
            sigma_threshold: self.sigma,
            timestamp_resolution_us: self.resolution_us,
            cutoff_hz: self.cutoff_hz,
            exposure_us: self.exposure_us,
            seed,
            ..EmulatorConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// Block length in microseconds.
    #[arg(long, default_value_t = 100_000)]
    pub delta_t_us: u64,
    /// Sub-windows per block.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// TIE variant: tt, tth, tht or thh.
    #[arg(long, default_value = "tht", value_parser = parse_variant)]
    pub variant: TieVariant,
    /// TIE channel count C (a multiple of 3).
    #[arg(long, default_value_t = 9)]
    pub channels: usize,
}

impl WindowArgs {
    pub fn config(&self) -> WindowConfig {
        WindowConfig {
            delta_t: self.delta_t_us,
            n: self.n,
            variant: self.variant,
            channels: self.channels,
        }
    }
}

fn parse_variant(s: &str) -> Result<TieVariant, String> {
    s.parse().map_err(|e: evkit::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct EmulateArgs {
    /// Directory of PGM frames, taken in file-name order.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output event file; the sidecar is written next to it with a `.json` suffix.
    #[arg(long)]
    pub out: PathBuf,
    /// Time between consecutive frames in microseconds.
    #[arg(long, default_value_t = 33_333)]
    pub interval_us: u64,
    /// Seed of the per-pixel threshold draws.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub emulator: EmulatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RepresentArgs {
    /// Input event file.
    #[arg(long)]
    pub events: PathBuf,
    /// Output P6 image.
    #[arg(long)]
    pub out: PathBuf,
    /// TIE variant: tt, tth, tht or thh.
    #[arg(long, default_value = "tht", value_parser = parse_variant)]
    pub variant: TieVariant,
    /// TIE channel count C (a multiple of 3).
    #[arg(long, default_value_t = 9)]
    pub channels: usize,
    /// Render only this window index (requires --delta-t-us); default is the whole stream.
    #[arg(long, requires = "delta_t_us")]
    pub window: Option<usize>,
    /// Block length in microseconds for --window.
    #[arg(long)]
    pub delta_t_us: Option<u64>,
    /// Sub-windows per block for --window.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Also write the signed C-channel tensor as a raw tensor file.
    #[arg(long)]
    pub dump_tensor: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory (created if needed).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated motion classes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "expand,contract,translate_up,translate_down,rotate_cw,rotate_ccw,blink"
    )]
    pub classes: Vec<String>,
    #[arg(long, default_value_t = 40)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub width: u16,
    #[arg(long, default_value_t = 64)]
    pub height: u16,
    /// Frames per sample.
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 33_333)]
    pub interval_us: u64,
    /// Pixel noise standard deviation as a fraction of full scale.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Fraction of each class assigned to the validation split.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Seed of the scene parameters and pixel noise.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Seed of the emulator's per-pixel threshold draws.
    #[arg(long, default_value_t = 42)]
    pub emulator_seed: u64,
    #[command(flatten)]
    pub emulator: EmulatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adam)]
    pub optimizer: OptimizerChoice,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Seed of the initialization and shuffling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

impl OptimArgs {
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            optimizer: match self.optimizer {
                OptimizerChoice::Sgd => OptimizerKind::Sgd,
                OptimizerChoice::Adam => OptimizerKind::Adam,
            },
            batch_size: self.batch_size,
            seed: self.seed,
            ..base
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional metric history CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Pretraining objective (default epochs 100, learning rate 1e-3).
    #[arg(long, value_enum, default_value_t = LossChoice::ReconstructionL2)]
    pub loss: LossChoice,
    /// Weight of the squared-error term under the cGAN objective.
    #[arg(long, default_value_t = 100.0)]
    pub recon_weight: f64,
    /// Use the saturating log(1 - D) generator loss under the cGAN objective.
    #[arg(long)]
    pub saturating: bool,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossChoice {
    ReconstructionL2,
    Cgan,
}

impl PretrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = self.optim.apply(TrainConfig::pretraining());
        cfg.loss = match self.loss {
            LossChoice::ReconstructionL2 => PretrainLoss::ReconstructionL2,
            LossChoice::Cgan => PretrainLoss::Cgan,
        };
        cfg.recon_weight = self.recon_weight;
        cfg.generator_objective = if self.saturating {
            GeneratorObjective::Saturating
        } else {
            GeneratorObjective::NonSaturating
        };
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Encoder regime (default epochs 30, learning rate 1e-4).
    #[arg(long, value_enum, default_value_t = RegimeChoice::Scratch)]
    pub regime: RegimeChoice,
    /// Classify three-window sequences through the LSTM (on) or single windows (off).
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub lstm: Toggle,
    /// Pretrained checkpoint; required by the frozen and finetune regimes.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Finetune only: epochs with the encoder still frozen before it is released.
    #[arg(long, default_value_t = 10)]
    pub warmup_epochs: usize,
    /// Finetune only: encoder learning rate relative to --lr once released.
    #[arg(long, default_value_t = 0.1)]
    pub encoder_lr_scale: f64,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional metric history CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeChoice {
    Scratch,
    Frozen,
    Finetune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = self.optim.apply(TrainConfig::default());
        cfg.encoder_mode = match self.regime {
            RegimeChoice::Scratch => EncoderMode::Scratch,
            RegimeChoice::Frozen => EncoderMode::Frozen,
            RegimeChoice::Finetune => EncoderMode::Finetune,
        };
        cfg.use_lstm = self.lstm == Toggle::On;
        cfg.finetune_warmup_epochs = self.warmup_epochs;
        cfg.finetune_encoder_lr_scale = self.encoder_lr_scale;
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Classifier checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Which samples to score.
    #[arg(long, value_enum, default_value_t = SplitChoice::Val)]
    pub split: SplitChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Val,
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    pub path: PathBuf,
}

fn init_threads() -> Result<(), commands::CliError> {
    if let Ok(v) = std::env::var("EVKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| commands::CliError::usage(format!("EVKIT_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| commands::CliError::internal(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Info
        })
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let result = init_threads().and_then(|()| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
