use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::layers::MlpTrace;
use super::loss::{argmax, mse, softmax};
use super::model::{init_model, GeneratorObjective, ModelDims, Part, ToyModel};
use super::optim::{Optimizer, OptimizerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    Scratch,
    Frozen,
    Finetune,
}

impl EncoderMode {
    pub const ALL: [EncoderMode; 3] = [Self::Scratch, Self::Frozen, Self::Finetune];

    pub fn name(self) -> &'static str {
        match self {
            Self::Scratch => "scratch",
            Self::Frozen => "frozen",
            Self::Finetune => "finetune",
        }
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown encoder mode '{s}' (expected scratch, frozen or finetune)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainLoss {
    ReconstructionL2,
    Cgan,
}

impl FromStr for PretrainLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruction_l2" | "l2" => Ok(Self::ReconstructionL2),
            "cgan" => Ok(Self::Cgan),
            other => Err(invalid(format!("unknown pretraining loss '{other}'"))),
        }
    }
}

pub const PRETRAIN_LR: f64 = 1e-3;
pub const PRETRAIN_EPOCHS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Zero returns the initialization untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub encoder_mode: EncoderMode,
    pub loss: PretrainLoss,
    /// Weight of the squared-error term added to the adversarial generator loss.
    pub recon_weight: f64,
    pub generator_objective: GeneratorObjective,
    pub use_lstm: bool,
    /// Under `finetune`, epochs spent with the encoder still frozen before it is
    /// released, so the head adapts to the transferred features first.
    pub finetune_warmup_epochs: usize,
    /// Under `finetune`, encoder learning rate relative to `learning_rate` once released.
    pub finetune_encoder_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            optimizer: OptimizerKind::Adam,
            epochs: 30,
            batch_size: 32,
            seed: 42,
            encoder_mode: EncoderMode::Scratch,
            loss: PretrainLoss::ReconstructionL2,
            recon_weight: 100.0,
            generator_objective: GeneratorObjective::NonSaturating,
            use_lstm: true,
            finetune_warmup_epochs: 10,
            finetune_encoder_lr_scale: 0.1,
        }
    }
}

impl TrainConfig {
    /// Defaults for reconstruction pretraining: a larger step and longer schedule
    /// than classification, which uses the plain defaults.
    pub fn pretraining() -> Self {
        Self {
            learning_rate: PRETRAIN_LR,
            epochs: PRETRAIN_EPOCHS,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(self.finetune_encoder_lr_scale > 0.0 && self.finetune_encoder_lr_scale.is_finite()) {
            return Err(invalid("finetune encoder learning-rate scale must be positive"));
        }
        if !(self.recon_weight >= 0.0) {
            return Err(invalid("reconstruction weight must be non-negative"));
        }
        Ok(())
    }
}

/// A labelled window sequence, each window already prepared as network input.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub windows: Vec<Vec<f64>>,
    pub label: usize,
}

impl Sample {
    /// Windows fed to the classifier: all of them with the LSTM, else the last one.
    pub fn inputs(&self, use_lstm: bool) -> &[Vec<f64>] {
        if use_lstm {
            &self.windows
        } else {
            &self.windows[self.windows.len() - 1..]
        }
    }
}

/// Representation input paired with its grayscale target in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,split,loss,accuracy")?;
    for r in rows {
        match r.accuracy {
            Some(a) => writeln!(out, "{},{},{},{}", r.epoch, r.split, r.loss, a)?,
            None => writeln!(out, "{},{},{},", r.epoch, r.split, r.loss)?,
        }
    }
    Ok(())
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0000 ^ epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

fn check_samples(samples: &[Sample], dims: &ModelDims, use_lstm: bool) -> Result<()> {
    let need = if use_lstm { super::model::SEQUENCE_LEN } else { 1 };
    for (i, s) in samples.iter().enumerate() {
        if s.windows.len() < need {
            return Err(invalid(format!("sample {i} has {} windows, need {need}", s.windows.len())));
        }
        if use_lstm && s.windows.len() != need {
            return Err(invalid(format!("sample {i} has {} windows, need exactly {need}", s.windows.len())));
        }
        if s.label >= dims.classes {
            return Err(invalid(format!("sample {i} label {} out of range for {} classes", s.label, dims.classes)));
        }
    }
    Ok(())
}

/// Trains the classifier under `cfg.encoder_mode`, starting from `init_model(cfg.seed)`
/// with the encoder replaced by `pretrained`'s when transferring.
pub fn train(
    train_set: &[Sample],
    val_set: Option<&[Sample]>,
    dims: &ModelDims,
    cfg: &TrainConfig,
    pretrained: Option<&ToyModel>,
) -> Result<(ToyModel, Vec<MetricRow>)> {
    cfg.validate()?;
    let mut model = init_model(cfg.seed, dims)?;
    model.use_lstm = cfg.use_lstm;
    match (cfg.encoder_mode, pretrained) {
        (EncoderMode::Scratch, _) => {}
        (mode, None) => return Err(Error::MissingPretrained(mode.name())),
        (_, Some(p)) => model.load_encoder(p)?,
    }
    check_samples(train_set, dims, cfg.use_lstm)?;
    if let Some(v) = val_set {
        check_samples(v, dims, cfg.use_lstm)?;
    }
    if cfg.epochs > 0 && train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut history = Vec::new();
    // Encoder features stay fixed while the encoder is frozen, so compute them once.
    let mut cached: Option<Vec<Vec<MlpTrace>>> = None;
    for epoch in 1..=cfg.epochs {
        let train_encoder = match cfg.encoder_mode {
            EncoderMode::Scratch => true,
            EncoderMode::Frozen => false,
            EncoderMode::Finetune => epoch > cfg.finetune_warmup_epochs,
        };
        if train_encoder {
            cached = None;
        } else if cached.is_none() {
            cached = Some(
                train_set
                    .iter()
                    .map(|s| s.inputs(cfg.use_lstm).iter().map(|x| feature_trace(&model, x)).collect())
                    .collect(),
            );
        }
        let order = epoch_order(train_set.len(), cfg.seed, epoch);
        let mut total = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = model.zeros_like();
            for &i in batch {
                let s = &train_set[i];
                let trace = match &cached {
                    Some(c) => model.classify_from_encodings(c[i].clone())?,
                    None => model.classify_trace(s.inputs(cfg.use_lstm))?,
                };
                if argmax(&trace.logits) == s.label {
                    correct += 1;
                }
                total += model.classify_backward(&trace, s.label, &mut grad, train_encoder);
            }
            grad.scale(1.0 / batch.len() as f64);
            let encoder_scale = match (train_encoder, cfg.encoder_mode) {
                (false, _) => 0.0,
                (true, EncoderMode::Finetune) => cfg.finetune_encoder_lr_scale,
                (true, _) => 1.0,
            };
            opt.step_scaled(&mut model, &grad, |p| match p {
                Part::Encoder => encoder_scale,
                Part::Lstm if cfg.use_lstm => 1.0,
                Part::Head => 1.0,
                Part::Lstm | Part::Decoder | Part::Discriminator => 0.0,
            });
        }
        let n = train_set.len() as f64;
        history.push(MetricRow {
            epoch,
            split: "train".into(),
            loss: total / n,
            accuracy: Some(correct as f64 / n),
        });
        if let Some(v) = val_set.filter(|v| !v.is_empty()) {
            let e = evaluate(&model, v)?;
            history.push(MetricRow {
                epoch,
                split: "val".into(),
                loss: e.loss,
                accuracy: Some(e.accuracy),
            });
        }
        log::debug!("epoch {epoch}: train loss {:.5}", total / n);
    }
    Ok((model, history))
}

fn feature_trace(model: &ToyModel, x: &[f64]) -> MlpTrace {
    MlpTrace {
        values: vec![model.encoder.forward(x)],
        pre: Vec::new(),
    }
}

/// Pretrains encoder and decoder on reconstruction (plus a discriminator under the cGAN loss).
pub fn pretrain(
    pairs: &[ReconPair],
    val_pairs: Option<&[ReconPair]>,
    dims: &ModelDims,
    cfg: &TrainConfig,
) -> Result<(ToyModel, Vec<MetricRow>)> {
    cfg.validate()?;
    let mut model = init_model(cfg.seed, dims)?;
    if cfg.epochs > 0 && pairs.is_empty() {
        return Err(Error::Empty("reconstruction pairs"));
    }
    let mut g_opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut d_opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        let order = epoch_order(pairs.len(), cfg.seed, epoch);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            if cfg.loss == PretrainLoss::Cgan {
                let mut d_grad = model.zeros_like();
                let mut d_loss = 0.0;
                for &i in batch {
                    d_loss += model.discriminator_backward(&pairs[i].input, &pairs[i].target, &mut d_grad)?;
                }
                d_grad.scale(scale);
                d_opt.step(&mut model, &d_grad, |p| p == Part::Discriminator);
                log::trace!("discriminator loss {:.5}", d_loss * scale);
            }
            let mut grad = model.zeros_like();
            for &i in batch {
                let ReconPair { input, target } = &pairs[i];
                total += match cfg.loss {
                    PretrainLoss::ReconstructionL2 => model.reconstruction_backward(input, target, &mut grad)?,
                    PretrainLoss::Cgan => model.generator_backward(
                        input,
                        target,
                        cfg.generator_objective,
                        cfg.recon_weight,
                        &mut grad,
                    )?,
                };
            }
            grad.scale(scale);
            g_opt.step(&mut model, &grad, |p| matches!(p, Part::Encoder | Part::Decoder));
        }
        history.push(MetricRow {
            epoch,
            split: "train".into(),
            loss: total / pairs.len() as f64,
            accuracy: None,
        });
        if let Some(v) = val_pairs.filter(|v| !v.is_empty()) {
            history.push(MetricRow {
                epoch,
                split: "val".into(),
                loss: reconstruction_error(&model, v)?,
                accuracy: None,
            });
        }
    }
    Ok((model, history))
}

/// Mean squared reconstruction error over `pairs`.
pub fn reconstruction_error(model: &ToyModel, pairs: &[ReconPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("reconstruction pairs"));
    }
    let mut total = 0.0;
    for p in pairs {
        total += mse(&model.reconstruct(&p.input)?, &p.target);
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean cross-entropy; zero when built from bare predictions.
    pub loss: f64,
    /// Unnormalized counts, rows = true class, columns = predicted.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized confusion matrix; empty rows stay zero.
    pub confusion: Vec<Vec<f64>>,
}

/// Accuracy and confusion matrix from predicted and true labels.
pub fn evaluate_predictions(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Evaluation> {
    if truth.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truth.len()),
            actual: format!("{}", predicted.len()),
        });
    }
    let mut counts = vec![vec![0usize; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(invalid(format!("label out of range for {classes} classes")));
        }
        counts[t][p] += 1;
    }
    let correct: usize = (0..classes).map(|k| counts[k][k]).sum();
    let confusion = counts
        .iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.iter()
                .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                .collect()
        })
        .collect();
    Ok(Evaluation {
        accuracy: correct as f64 / truth.len() as f64,
        loss: 0.0,
        counts,
        confusion,
    })
}

pub fn predict(model: &ToyModel, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| Ok(softmax(&model.classify_trace(s.inputs(model.use_lstm))?.logits)))
        .collect()
}

pub fn evaluate(model: &ToyModel, samples: &[Sample]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut predicted = Vec::with_capacity(samples.len());
    let mut loss = 0.0;
    for s in samples {
        let trace = model.classify_trace(s.inputs(model.use_lstm))?;
        loss += super::loss::cross_entropy(&trace.logits, s.label).0;
        predicted.push(argmax(&trace.logits));
    }
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut e = evaluate_predictions(&predicted, &truth, model.dims.classes)?;
    e.loss = loss / samples.len() as f64;
    Ok(e)
}
