use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Slope of the leaky rectifier on negative inputs.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Standard deviation of the weight initialization.
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    LeakyRelu,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Affine layer `y = W x + b` with `W` stored row-major as `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights from `N(0, INIT_STD^2)`, zero bias.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("constant std is valid");
        let weight = (0..in_dim * out_dim).map(|_| normal.sample(rng)).collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.in_dim))
            .zip(&self.bias)
        {
            *o = b + dot(row, x);
        }
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// writes the input gradient into `grad_in`.
    pub fn backward(
        &self,
        x: &[f64],
        grad_out: &[f64],
        grad: &mut Dense,
        grad_in: Option<&mut [f64]>,
    ) {
        for ((g_row, &g), gb) in grad
            .weight
            .chunks_exact_mut(self.in_dim)
            .zip(grad_out)
            .zip(grad.bias.iter_mut())
        {
            *gb += g;
            if g != 0.0 {
                axpy(g, x, g_row);
            }
        }
        if let Some(grad_in) = grad_in {
            grad_in.iter_mut().for_each(|v| *v = 0.0);
            for (row, &g) in self.weight.chunks_exact(self.in_dim).zip(grad_out) {
                if g != 0.0 {
                    axpy(g, row, grad_in);
                }
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators keep the reduction order fixed and let the
    // compiler vectorize.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Stack of dense layers, each followed by its activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activations: Vec<Activation>,
}

/// Intermediate values of an [`Mlp`] forward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpTrace {
    /// Input to each layer followed by the final output.
    pub values: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes` lists every width from input to output.
    pub fn init<R: Rng>(sizes: &[usize], hidden: Activation, last: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        let activations = (0..n)
            .map(|i| if i + 1 == n { last } else { hidden })
            .collect();
        Self {
            layers,
            activations,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim, l.out_dim))
                .collect(),
            activations: self.activations.clone(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.in_dim()];
        s.extend(self.layers.iter().map(|l| l.out_dim));
        s
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).values.pop().unwrap_or_default()
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        values.push(x.to_vec());
        for (layer, &act) in self.layers.iter().zip(&self.activations) {
            let mut z = vec![0.0; layer.out_dim];
            layer.forward(values.last().expect("non-empty"), &mut z);
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            values.push(a);
        }
        MlpTrace { values, pre }
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the output) and returns the
    /// gradient w.r.t. the input when `want_input` is set.
    pub fn backward(
        &self,
        trace: &MlpTrace,
        grad_out: &[f64],
        grad: &mut Mlp,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut g = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let act = self.activations[i];
            for ((gv, &z), &a) in g.iter_mut().zip(&trace.pre[i]).zip(&trace.values[i + 1]) {
                *gv *= act.derivative(z, a);
            }
            let need_in = i > 0 || want_input;
            let mut g_in = if need_in {
                vec![0.0; self.layers[i].in_dim]
            } else {
                Vec::new()
            };
            self.layers[i].backward(
                &trace.values[i],
                &g,
                &mut grad.layers[i],
                need_in.then_some(g_in.as_mut_slice()),
            );
            if !need_in {
                return None;
            }
            g = g_in;
        }
        Some(g)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }
}
