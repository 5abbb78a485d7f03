use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emulator::GrayFrame;
use crate::error::{invalid, Error, Result};
use crate::repr::TieImage;

use super::layers::{sigmoid, softplus, Activation, Dense, Mlp};
use super::loss::{cross_entropy, softmax};
use super::lstm::{LstmCell, LstmStep};

/// Number of consecutive windows the recurrent head consumes.
pub const SEQUENCE_LEN: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Side of the square network input and reconstruction.
    pub image_side: usize,
    pub encoder_hidden: Vec<usize>,
    pub feature: usize,
    pub decoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub classes: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            image_side: 32,
            encoder_hidden: Vec::new(),
            feature: 64,
            decoder_hidden: vec![256],
            discriminator_hidden: vec![64],
            lstm_hidden: 64,
            classes: 7,
        }
    }
}

impl ModelDims {
    /// Three-channel input width.
    pub fn input(&self) -> usize {
        3 * self.image_side * self.image_side
    }

    /// Grayscale reconstruction width.
    pub fn output(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_side == 0 || self.feature == 0 || self.lstm_hidden == 0 {
            return Err(invalid("model widths must be positive"));
        }
        if self.classes < 2 {
            return Err(invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.feature != self.lstm_hidden {
            // The head is shared between the recurrent and single-window modes.
            return Err(invalid(format!(
                "feature width {} must equal LSTM hidden width {}",
                self.feature, self.lstm_hidden
            )));
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .chain(&self.discriminator_hidden)
            .any(|&w| w == 0)
        {
            return Err(invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    fn encoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input()];
        s.extend(&self.encoder_hidden);
        s.push(self.feature);
        s
    }

    fn decoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.feature];
        s.extend(&self.decoder_hidden);
        s.push(self.output());
        s
    }

    fn discriminator_sizes(&self) -> Vec<usize> {
        let mut s = vec![2 * self.output()];
        s.extend(&self.discriminator_hidden);
        s.push(1);
        s
    }
}

/// Parameter groups that training regimes switch on and off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Encoder,
    Decoder,
    Discriminator,
    Lstm,
    Head,
}

/// Named view of one parameter tensor.
#[derive(Debug)]
pub struct TensorView<'a> {
    pub name: String,
    pub part: Part,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub dims: ModelDims,
    /// Classify window triplets through the LSTM; otherwise a single window feeds the head.
    pub use_lstm: bool,
    pub encoder: Mlp,
    pub decoder: Mlp,
    /// Produces a logit; the probability is its sigmoid.
    pub discriminator: Mlp,
    pub lstm: LstmCell,
    pub head: Dense,
}

/// All weights `N(0, 0.02^2)` from a seeded generator, biases zero.
pub fn init_model(seed: u64, dims: &ModelDims) -> Result<ToyModel> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = Mlp::init(
        &dims.encoder_sizes(),
        Activation::LeakyRelu,
        Activation::LeakyRelu,
        &mut rng,
    );
    let decoder = Mlp::init(&dims.decoder_sizes(), Activation::Relu, Activation::Tanh, &mut rng);
    let discriminator = Mlp::init(
        &dims.discriminator_sizes(),
        Activation::LeakyRelu,
        Activation::Identity,
        &mut rng,
    );
    let lstm = LstmCell::init(dims.feature, dims.lstm_hidden, &mut rng);
    let head = Dense::init(dims.lstm_hidden, dims.classes, &mut rng);
    Ok(ToyModel {
        dims: dims.clone(),
        use_lstm: true,
        encoder,
        decoder,
        discriminator,
        lstm,
        head,
    })
}

/// Forward values of one classification pass.
#[derive(Clone, Debug)]
pub struct ClassifyTrace {
    pub encodings: Vec<super::layers::MlpTrace>,
    pub lstm_steps: Vec<LstmStep>,
    pub logits: Vec<f64>,
}

/// Which generator objective the adversarial term uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorObjective {
    /// `-log D(fake)`.
    NonSaturating,
    /// `log(1 - D(fake))`.
    Saturating,
}

impl ToyModel {
    pub fn zeros_like(&self) -> ToyModel {
        ToyModel {
            dims: self.dims.clone(),
            use_lstm: self.use_lstm,
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            discriminator: self.discriminator.zeros_like(),
            lstm: self.lstm.zeros_like(),
            head: Dense::zeros(self.head.in_dim, self.head.out_dim),
        }
    }

    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::new();
        push_mlp(&mut out, "encoder", Part::Encoder, &self.encoder);
        push_mlp(&mut out, "decoder", Part::Decoder, &self.decoder);
        push_mlp(&mut out, "discriminator", Part::Discriminator, &self.discriminator);
        out.push(TensorView {
            name: "lstm.input.weight".into(),
            part: Part::Lstm,
            shape: vec![self.lstm.wx.out_dim, self.lstm.wx.in_dim],
            data: &self.lstm.wx.weight,
        });
        out.push(TensorView {
            name: "lstm.bias".into(),
            part: Part::Lstm,
            shape: vec![self.lstm.wx.out_dim],
            data: &self.lstm.wx.bias,
        });
        out.push(TensorView {
            name: "lstm.recurrent.weight".into(),
            part: Part::Lstm,
            shape: vec![self.lstm.wh.out_dim, self.lstm.wh.in_dim],
            data: &self.lstm.wh.weight,
        });
        out.push(TensorView {
            name: "head.weight".into(),
            part: Part::Head,
            shape: vec![self.head.out_dim, self.head.in_dim],
            data: &self.head.weight,
        });
        out.push(TensorView {
            name: "head.bias".into(),
            part: Part::Head,
            shape: vec![self.head.out_dim],
            data: &self.head.bias,
        });
        out
    }

    /// Mutable parameter slices in the same order as [`ToyModel::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(Part, &mut [f64])> {
        let mut out: Vec<(Part, &mut [f64])> = Vec::new();
        for (part, mlp) in [
            (Part::Encoder, &mut self.encoder),
            (Part::Decoder, &mut self.decoder),
            (Part::Discriminator, &mut self.discriminator),
        ] {
            for l in mlp.layers.iter_mut() {
                out.push((part, l.weight.as_mut_slice()));
                out.push((part, l.bias.as_mut_slice()));
            }
        }
        out.push((Part::Lstm, self.lstm.wx.weight.as_mut_slice()));
        out.push((Part::Lstm, self.lstm.wx.bias.as_mut_slice()));
        out.push((Part::Lstm, self.lstm.wh.weight.as_mut_slice()));
        out.push((Part::Head, self.head.weight.as_mut_slice()));
        out.push((Part::Head, self.head.bias.as_mut_slice()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Flat index ranges `(part, start..end)` for every tensor.
    pub fn param_layout(&self) -> Vec<(Part, std::ops::Range<usize>)> {
        let mut start = 0;
        self.tensors()
            .iter()
            .map(|t| {
                let r = start..start + t.data.len();
                start = r.end;
                (t.part, r)
            })
            .collect()
    }

    /// Reference to a parameter by flat index.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for (_, t) in self.tensors_mut() {
            if index < t.len() {
                return &mut t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Replaces the encoder with a copy of `other`'s, checking shapes.
    pub fn load_encoder(&mut self, other: &ToyModel) -> Result<()> {
        if self.encoder.sizes() != other.encoder.sizes() {
            return Err(Error::ShapeMismatch {
                expected: format!("encoder {:?}", self.encoder.sizes()),
                actual: format!("encoder {:?}", other.encoder.sizes()),
            });
        }
        self.encoder = other.encoder.clone();
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.dims.input() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input values (3x{s}x{s})", self.dims.input(), s = self.dims.image_side),
                actual: format!("{} values", input.len()),
            });
        }
        Ok(())
    }

    fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.dims.output() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} target values", self.dims.output()),
                actual: format!("{} values", target.len()),
            });
        }
        Ok(())
    }

    pub fn encode(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.encoder.forward(input))
    }

    pub fn reconstruct(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decoder.forward(&self.encode(input)?))
    }

    pub fn discriminator_logit(&self, target: &[f64], candidate: &[f64]) -> Result<f64> {
        self.check_target(target)?;
        self.check_target(candidate)?;
        let pair: Vec<f64> = target.iter().chain(candidate).copied().collect();
        Ok(self.discriminator.forward(&pair)[0])
    }

    pub fn discriminate(&self, target: &[f64], candidate: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.discriminator_logit(target, candidate)?))
    }

    /// Number of windows one classification consumes.
    pub fn sequence_len(&self) -> usize {
        if self.use_lstm {
            SEQUENCE_LEN
        } else {
            1
        }
    }

    pub fn classify_trace(&self, inputs: &[Vec<f64>]) -> Result<ClassifyTrace> {
        if inputs.len() != self.sequence_len() {
            return Err(invalid(format!(
                "classifier expects {} window images, got {}",
                self.sequence_len(),
                inputs.len()
            )));
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let encodings: Vec<_> = inputs.iter().map(|x| self.encoder.forward_trace(x)).collect();
        self.classify_from_encodings(encodings)
    }

    /// Classification head over precomputed encoder traces.
    pub fn classify_from_encodings(
        &self,
        encodings: Vec<super::layers::MlpTrace>,
    ) -> Result<ClassifyTrace> {
        let features: Vec<Vec<f64>> = encodings.iter().map(|t| t.output().to_vec()).collect();
        let (lstm_steps, head_in) = if self.use_lstm {
            let steps = self.lstm.unroll(&features);
            let h = steps.last().map(|s| s.h.clone()).unwrap_or_default();
            (steps, h)
        } else {
            (Vec::new(), features[0].clone())
        };
        let mut logits = vec![0.0; self.head.out_dim];
        self.head.forward(&head_in, &mut logits);
        Ok(ClassifyTrace {
            encodings,
            lstm_steps,
            logits,
        })
    }

    pub fn classify(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(softmax(&self.classify_trace(inputs)?.logits))
    }

    /// Cross-entropy on one example; accumulates gradients into `grad`.
    /// Encoder gradients are skipped unless `train_encoder` is set.
    pub fn classify_backward(
        &self,
        trace: &ClassifyTrace,
        label: usize,
        grad: &mut ToyModel,
        train_encoder: bool,
    ) -> f64 {
        let (loss, g_logits) = cross_entropy(&trace.logits, label);
        let head_in: &[f64] = if self.use_lstm {
            &trace.lstm_steps.last().expect("non-empty sequence").h
        } else {
            trace.encodings[0].output()
        };
        let mut g_head_in = vec![0.0; self.head.in_dim];
        self.head
            .backward(head_in, &g_logits, &mut grad.head, Some(&mut g_head_in));
        let g_features = if self.use_lstm {
            self.lstm.backward(&trace.lstm_steps, &g_head_in, &mut grad.lstm)
        } else {
            vec![g_head_in]
        };
        if train_encoder {
            for (enc, g) in trace.encodings.iter().zip(&g_features) {
                self.encoder.backward(enc, g, &mut grad.encoder, false);
            }
        }
        loss
    }

    /// Mean squared reconstruction error; accumulates encoder and decoder gradients.
    pub fn reconstruction_backward(&self, input: &[f64], target: &[f64], grad: &mut ToyModel) -> Result<f64> {
        self.check_input(input)?;
        self.check_target(target)?;
        let enc = self.encoder.forward_trace(input);
        let dec = self.decoder.forward_trace(enc.output());
        let n = target.len() as f64;
        let mut loss = 0.0;
        let g_out: Vec<f64> = dec
            .output()
            .iter()
            .zip(target)
            .map(|(r, t)| {
                let d = r - t;
                loss += d * d;
                2.0 * d / n
            })
            .collect();
        let g_feat = self
            .decoder
            .backward(&dec, &g_out, &mut grad.decoder, true)
            .expect("requested");
        self.encoder.backward(&enc, &g_feat, &mut grad.encoder, false);
        Ok(loss / n)
    }

    /// `-log D(t, t) - log(1 - D(t, G(x)))` with the generator output held fixed;
    /// accumulates discriminator gradients only.
    pub fn discriminator_backward(&self, input: &[f64], target: &[f64], grad: &mut ToyModel) -> Result<f64> {
        self.check_target(target)?;
        let fake = self.reconstruct(input)?;
        let real_pair: Vec<f64> = target.iter().chain(target).copied().collect();
        let fake_pair: Vec<f64> = target.iter().chain(&fake).copied().collect();
        let real = self.discriminator.forward_trace(&real_pair);
        let fake_t = self.discriminator.forward_trace(&fake_pair);
        let z_real = real.output()[0];
        let z_fake = fake_t.output()[0];
        let loss = softplus(-z_real) + softplus(z_fake);
        self.discriminator
            .backward(&real, &[sigmoid(z_real) - 1.0], &mut grad.discriminator, false);
        self.discriminator
            .backward(&fake_t, &[sigmoid(z_fake)], &mut grad.discriminator, false);
        Ok(loss)
    }

    /// Adversarial generator term plus `recon_weight` times the squared error;
    /// accumulates encoder and decoder gradients through a frozen discriminator.
    pub fn generator_backward(
        &self,
        input: &[f64],
        target: &[f64],
        objective: GeneratorObjective,
        recon_weight: f64,
        grad: &mut ToyModel,
    ) -> Result<f64> {
        self.check_input(input)?;
        self.check_target(target)?;
        let enc = self.encoder.forward_trace(input);
        let dec = self.decoder.forward_trace(enc.output());
        let fake = dec.output();
        let pair: Vec<f64> = target.iter().chain(fake).copied().collect();
        let disc = self.discriminator.forward_trace(&pair);
        let z = disc.output()[0];
        let (adv, g_z) = match objective {
            GeneratorObjective::NonSaturating => (softplus(-z), sigmoid(z) - 1.0),
            GeneratorObjective::Saturating => (-softplus(z), -sigmoid(z)),
        };
        let mut scratch = self.discriminator.zeros_like();
        let g_pair = self
            .discriminator
            .backward(&disc, &[g_z], &mut scratch, true)
            .expect("requested");
        let n = target.len() as f64;
        let mut l2 = 0.0;
        let g_fake: Vec<f64> = fake
            .iter()
            .zip(target)
            .zip(&g_pair[target.len()..])
            .map(|((r, t), ga)| {
                let d = r - t;
                l2 += d * d;
                ga + recon_weight * 2.0 * d / n
            })
            .collect();
        let g_feat = self
            .decoder
            .backward(&dec, &g_fake, &mut grad.decoder, true)
            .expect("requested");
        self.encoder.backward(&enc, &g_feat, &mut grad.encoder, false);
        Ok(adv + recon_weight * l2 / n)
    }
}

fn push_mlp<'a>(out: &mut Vec<TensorView<'a>>, prefix: &str, part: Part, mlp: &'a Mlp) {
    for (i, l) in mlp.layers.iter().enumerate() {
        out.push(TensorView {
            name: format!("{prefix}.{i}.weight"),
            part,
            shape: vec![l.out_dim, l.in_dim],
            data: &l.weight,
        });
        out.push(TensorView {
            name: format!("{prefix}.{i}.bias"),
            part,
            shape: vec![l.out_dim],
            data: &l.bias,
        });
    }
}

/// Center-crops to a square and box-filters down (or up) to `side x side`.
fn area_resample(plane: &[u8], width: usize, height: usize, side: usize) -> Vec<f64> {
    let s = width.min(height);
    let x0 = (width - s) / 2;
    let y0 = (height - s) / 2;
    let weights = axis_weights(s, side);
    let mut rows = vec![0.0; s * side];
    for y in 0..s {
        let src = &plane[(y0 + y) * width + x0..(y0 + y) * width + x0 + s];
        for (ox, ws) in weights.iter().enumerate() {
            rows[y * side + ox] = ws.iter().map(|&(i, w)| w * src[i] as f64).sum();
        }
    }
    let mut out = vec![0.0; side * side];
    for (oy, ws) in weights.iter().enumerate() {
        for ox in 0..side {
            out[oy * side + ox] = ws.iter().map(|&(i, w)| w * rows[i * side + ox]).sum();
        }
    }
    out
}

/// Fractional source coverage of each output cell along one axis, normalized to sum to 1.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = lo + scale;
            let mut ws = Vec::new();
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            for i in first..last {
                let cover = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if cover > 0.0 {
                    ws.push((i, cover / scale));
                }
            }
            ws
        })
        .collect()
}

/// Network input from a TIE image: center crop, area downsample, bytes scaled to `[0, 1]`.
pub fn prepare_input(image: &TieImage, side: usize) -> Vec<f64> {
    let (w, h) = (image.width as usize, image.height as usize);
    let plane = w * h;
    let mut out = Vec::with_capacity(3 * side * side);
    for c in 0..3 {
        let resampled = area_resample(&image.rgb[c * plane..(c + 1) * plane], w, h, side);
        out.extend(resampled.into_iter().map(|v| v / 255.0));
    }
    out
}

/// Reconstruction target from a frame: center crop, area downsample, scaled to `[-1, 1]`.
pub fn prepare_target(frame: &GrayFrame, side: usize) -> Vec<f64> {
    area_resample(&frame.data, frame.width as usize, frame.height as usize, side)
        .into_iter()
        .map(|v| v / 127.5 - 1.0)
        .collect()
}

/// Feature vector of a TIE image.
pub fn encoder_forward(model: &ToyModel, image: &TieImage) -> Result<Vec<f64>> {
    model.encode(&prepare_input(image, model.dims.image_side))
}

/// Grayscale reconstruction in `(-1, 1)` of a TIE image.
pub fn reconstruct(model: &ToyModel, image: &TieImage) -> Result<Vec<f64>> {
    model.reconstruct(&prepare_input(image, model.dims.image_side))
}

/// Class probabilities for a window sequence (3 images with the LSTM, 1 without).
pub fn classify(model: &ToyModel, images: &[TieImage]) -> Result<Vec<f64>> {
    let inputs: Vec<Vec<f64>> = images
        .iter()
        .map(|im| prepare_input(im, model.dims.image_side))
        .collect();
    model.classify(&inputs)
}
