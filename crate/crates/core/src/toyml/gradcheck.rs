use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::layers::{softplus, Dense};
use super::loss::{cross_entropy, mse};
use super::model::{GeneratorObjective, Part, ToyModel};
use super::train::{ReconPair, Sample};

/// Parameters compared per loss.
pub const SUBSET: usize = 100;

/// Denominator floor. Central differences at `eps = 1e-5` carry roughly 1e-10
/// of absolute roundoff on O(1) losses, which swamps gradients much below this.
pub const REL_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckedLoss {
    Reconstruction,
    CganDiscriminator,
    CganGenerator,
    CrossEntropy,
}

impl CheckedLoss {
    pub const ALL: [CheckedLoss; 4] = [
        Self::Reconstruction,
        Self::CganDiscriminator,
        Self::CganGenerator,
        Self::CrossEntropy,
    ];

    fn parts(self, use_lstm: bool) -> Vec<Part> {
        match self {
            Self::Reconstruction | Self::CganGenerator => vec![Part::Encoder, Part::Decoder],
            Self::CganDiscriminator => vec![Part::Discriminator],
            Self::CrossEntropy if use_lstm => vec![Part::Encoder, Part::Lstm, Part::Head],
            Self::CrossEntropy => vec![Part::Encoder, Part::Head],
        }
    }
}

/// Inputs for one gradient check: a reconstruction pair and a labelled sequence.
#[derive(Clone, Debug)]
pub struct CheckSample {
    pub recon: ReconPair,
    pub class: Sample,
    pub recon_weight: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_loss: Vec<(CheckedLoss, f64)>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_loss.iter().map(|&(_, e)| e).fold(0.0, f64::max)
    }
}

/// Compares analytic gradients of every loss to central differences over a random
/// [`SUBSET`] of the parameters that loss depends on.
pub fn grad_check(model: &ToyModel, sample: &CheckSample, eps: f64, seed: u64) -> Result<GradCheckReport> {
    grad_check_scaled(model, sample, eps, seed, 1.0)
}

/// As [`grad_check`] with the analytic gradient multiplied by `factor`.
pub fn grad_check_scaled(
    model: &ToyModel,
    sample: &CheckSample,
    eps: f64,
    seed: u64,
    factor: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_loss = Vec::new();
    for loss in CheckedLoss::ALL {
        let mut grad = model.zeros_like();
        analytic(model, sample, loss, &mut grad)?;
        let flat_grad = grad.flat_params();
        let parts = loss.parts(model.use_lstm);
        let candidates: Vec<usize> = model
            .param_layout()
            .into_iter()
            .filter(|(p, _)| parts.contains(p))
            .flat_map(|(_, r)| r)
            .collect();
        let picks = index::sample(&mut rng, candidates.len(), SUBSET.min(candidates.len()));
        let mut worst: f64 = 0.0;
        let mut probe = model.clone();
        for k in picks {
            let idx = candidates[k];
            let orig = *probe.param_mut(idx);
            *probe.param_mut(idx) = orig + eps;
            let up = value(&probe, sample, loss)?;
            *probe.param_mut(idx) = orig - eps;
            let down = value(&probe, sample, loss)?;
            *probe.param_mut(idx) = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(factor * flat_grad[idx], numeric));
        }
        per_loss.push((loss, worst));
    }
    Ok(GradCheckReport { per_loss })
}

fn analytic(model: &ToyModel, s: &CheckSample, loss: CheckedLoss, grad: &mut ToyModel) -> Result<f64> {
    let ReconPair { input, target } = &s.recon;
    match loss {
        CheckedLoss::Reconstruction => model.reconstruction_backward(input, target, grad),
        CheckedLoss::CganDiscriminator => model.discriminator_backward(input, target, grad),
        CheckedLoss::CganGenerator => model.generator_backward(
            input,
            target,
            GeneratorObjective::NonSaturating,
            s.recon_weight,
            grad,
        ),
        CheckedLoss::CrossEntropy => {
            let trace = model.classify_trace(s.class.inputs(model.use_lstm))?;
            Ok(model.classify_backward(&trace, s.class.label, grad, true))
        }
    }
}

/// Loss value computed through the plain forward path only.
fn value(model: &ToyModel, s: &CheckSample, loss: CheckedLoss) -> Result<f64> {
    let ReconPair { input, target } = &s.recon;
    Ok(match loss {
        CheckedLoss::Reconstruction => mse(&model.reconstruct(input)?, target),
        CheckedLoss::CganDiscriminator => {
            let fake = model.reconstruct(input)?;
            softplus(-model.discriminator_logit(target, target)?) + softplus(model.discriminator_logit(target, &fake)?)
        }
        CheckedLoss::CganGenerator => {
            let fake = model.reconstruct(input)?;
            softplus(-model.discriminator_logit(target, &fake)?) + s.recon_weight * mse(&fake, target)
        }
        CheckedLoss::CrossEntropy => {
            let trace = model.classify_trace(s.class.inputs(model.use_lstm))?;
            cross_entropy(&trace.logits, s.class.label).0
        }
    })
}

/// Control case: one affine layer under `0.5 |W x + b - y|^2`, where central
/// differences are exact up to roundoff. Returns the maximum relative error.
pub fn linear_quadratic_check(seed: u64, eps: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_in, n_out) = (6, 4);
    let mut layer = Dense::init(n_in, n_out, &mut rng);
    layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
    let mut signed = |lo: f64, hi: f64| {
        let v: f64 = rng.random_range(lo..hi);
        if rng.random::<bool>() { v } else { -v }
    };
    // Inputs and residuals bounded away from zero keep every gradient O(1).
    let x: Vec<f64> = (0..n_in).map(|_| signed(0.5, 1.0)).collect();
    let y: Vec<f64> = (0..n_out).map(|_| signed(2.0, 3.0)).collect();
    let loss = |l: &Dense| {
        let mut out = vec![0.0; n_out];
        l.forward(&x, &mut out);
        0.5 * out.iter().zip(&y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
    };
    let mut out = vec![0.0; n_out];
    layer.forward(&x, &mut out);
    let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
    let mut grad = Dense::zeros(n_in, n_out);
    layer.backward(&x, &resid, &mut grad, None);

    let mut worst: f64 = 0.0;
    let analytic: Vec<f64> = grad.weight.iter().chain(&grad.bias).copied().collect();
    for (k, &a) in analytic.iter().enumerate() {
        let mut up = layer.clone();
        let mut down = layer.clone();
        let (pu, pd) = if k < n_in * n_out {
            (&mut up.weight[k], &mut down.weight[k])
        } else {
            (&mut up.bias[k - n_in * n_out], &mut down.bias[k - n_in * n_out])
        };
        *pu += eps;
        *pd -= eps;
        let numeric = (loss(&up) - loss(&down)) / (2.0 * eps);
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}
