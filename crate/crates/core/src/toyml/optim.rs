use serde::{Deserialize, Serialize};

use super::model::{Part, ToyModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(crate::error::invalid(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// First-order optimizer over the tensors of a [`ToyModel`].
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    /// Updates applied to each tensor; bias correction restarts for tensors that
    /// start training late, as when a frozen encoder is released.
    tensor_steps: Vec<u64>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            tensor_steps: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every tensor whose part passes `trainable`.
    pub fn step(&mut self, model: &mut ToyModel, grad: &ToyModel, trainable: impl Fn(Part) -> bool) {
        self.step_scaled(model, grad, |p| if trainable(p) { 1.0 } else { 0.0 });
    }

    /// Like [`Optimizer::step`] with a per-part learning-rate multiplier; parts
    /// with multiplier 0 are left untouched, optimizer state included.
    pub fn step_scaled(&mut self, model: &mut ToyModel, grad: &ToyModel, lr_scale: impl Fn(Part) -> f64) {
        self.step += 1;
        let grads = grad.tensors();
        let params = model.tensors_mut();
        if self.m.len() != params.len() {
            self.m = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
            self.tensor_steps = vec![0; params.len()];
        }
        for (k, ((part, p), g)) in params.into_iter().zip(&grads).enumerate() {
            let scale = lr_scale(part);
            if scale == 0.0 {
                continue;
            }
            let lr = self.lr * scale;
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, &gw) in p.iter_mut().zip(g.data) {
                        *w -= lr * gw;
                    }
                }
                OptimizerKind::Adam => {
                    self.tensor_steps[k] += 1;
                    let t = self.tensor_steps[k] as i32;
                    let bc1 = 1.0 - self.beta1.powi(t);
                    let bc2 = 1.0 - self.beta2.powi(t);
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let gw = g.data[i];
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gw;
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gw * gw;
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        p[i] -= lr * mh / (vh.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toyml::model::{init_model, ModelDims};

    fn dims() -> ModelDims {
        ModelDims {
            image_side: 2,
            encoder_hidden: vec![],
            feature: 3,
            decoder_hidden: vec![],
            discriminator_hidden: vec![],
            lstm_hidden: 3,
            classes: 2,
        }
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut m = init_model(1, &dims()).unwrap();
        let before = m.clone();
        let mut g = m.zeros_like();
        g.head.bias[0] = 2.0;
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        opt.step(&mut m, &g, |_| true);
        assert_eq!(m.head.bias[0], before.head.bias[0] - 1.0);
        assert_eq!(m.encoder, before.encoder);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut m = init_model(1, &dims()).unwrap();
        let mut g = m.zeros_like();
        g.head.bias[1] = 1e-3;
        g.encoder.layers[0].bias[0] = 5.0;
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-4);
        let before = m.clone();
        opt.step(&mut m, &g, |p| p != Part::Encoder);
        assert!((before.head.bias[1] - m.head.bias[1] - 1e-4).abs() < 1e-9);
        assert_eq!(m.encoder, before.encoder);
    }

    #[test]
    fn released_tensor_gets_fresh_bias_correction() {
        let mut m = init_model(1, &dims()).unwrap();
        let mut g = m.zeros_like();
        g.encoder.layers[0].bias[0] = 3.0;
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-4);
        for _ in 0..50 {
            opt.step(&mut m, &g, |p| p != Part::Encoder);
        }
        let before = m.encoder.layers[0].bias[0];
        opt.step(&mut m, &g, |_| true);
        assert!((before - m.encoder.layers[0].bias[0] - 1e-4).abs() < 1e-9);
    }
}
