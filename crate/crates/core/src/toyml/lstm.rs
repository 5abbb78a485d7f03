use rand::Rng;

use super::layers::{sigmoid, Dense};

/// Standard gated recurrent cell. Gate rows are stacked as input, forget,
/// candidate, output: `z = W_x x + W_h h + b`, each block `hidden` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[4H][I]`, bias holds the shared gate bias.
    pub wx: Dense,
    /// `[4H][H]`, bias unused (kept zero).
    pub wh: Dense,
}

/// Values saved by one step for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let wx = Dense::init(input_dim, 4 * hidden_dim, rng);
        let mut wh = Dense::init(hidden_dim, 4 * hidden_dim, rng);
        wh.bias.iter_mut().for_each(|b| *b = 0.0);
        Self {
            input_dim,
            hidden_dim,
            wx,
            wh,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            wx: Dense::zeros(input_dim, 4 * hidden_dim),
            wh: Dense::zeros(hidden_dim, 4 * hidden_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }

    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> LstmStep {
        let hd = self.hidden_dim;
        let mut zx = vec![0.0; 4 * hd];
        let mut zh = vec![0.0; 4 * hd];
        self.wx.forward(x, &mut zx);
        self.wh.forward(h, &mut zh);
        let z: Vec<f64> = zx.iter().zip(&zh).map(|(a, b)| a + b).collect();
        let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        let c_new: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        LstmStep {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            i,
            f,
            g,
            o,
            c: c_new,
            tanh_c,
            h: h_new,
        }
    }

    /// Runs the cell over `inputs` from a zero state.
    pub fn unroll(&self, inputs: &[Vec<f64>]) -> Vec<LstmStep> {
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let s = self.step(x, &h, &c);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            steps.push(s);
        }
        steps
    }

    /// Backpropagation through time given the gradient on the final hidden
    /// state. Returns the gradient w.r.t. every input.
    pub fn backward(&self, steps: &[LstmStep], grad_h_last: &[f64], grad: &mut LstmCell) -> Vec<Vec<f64>> {
        let hd = self.hidden_dim;
        let mut dh = grad_h_last.to_vec();
        let mut dc = vec![0.0; hd];
        let mut dxs = vec![Vec::new(); steps.len()];
        for (t, s) in steps.iter().enumerate().rev() {
            let mut dz = vec![0.0; 4 * hd];
            for k in 0..hd {
                let do_ = dh[k] * s.tanh_c[k];
                let dck = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dck * s.g[k];
                let dg = dck * s.i[k];
                let df = dck * s.c_prev[k];
                dz[k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[hd + k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2 * hd + k] = dg * (1.0 - s.g[k] * s.g[k]);
                dz[3 * hd + k] = do_ * s.o[k] * (1.0 - s.o[k]);
                dc[k] = dck * s.f[k];
            }
            let mut dx = vec![0.0; self.input_dim];
            self.wx.backward(&s.x, &dz, &mut grad.wx, Some(&mut dx));
            let mut dh_prev = vec![0.0; hd];
            self.wh.backward(&s.h_prev, &dz, &mut grad.wh, Some(&mut dh_prev));
            // The recurrent bias is not a free parameter.
            grad.wh.bias.iter_mut().for_each(|b| *b = 0.0);
            dh = dh_prev;
            dxs[t] = dx;
        }
        dxs
    }

    pub fn num_params(&self) -> usize {
        self.wx.num_params() + self.wh.weight.len()
    }
}
