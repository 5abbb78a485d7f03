/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CganLosses {
    pub generator: f64,
    pub discriminator: f64,
}

/// `D = -[log d_real + log(1 - d_fake)]`, `G = -log d_fake`.
pub fn cgan_losses(d_real: f64, d_fake: f64) -> CganLosses {
    let r = d_real.clamp(CLAMP, 1.0 - CLAMP);
    let f = d_fake.clamp(CLAMP, 1.0 - CLAMP);
    CganLosses {
        generator: -f.ln(),
        discriminator: -(r.ln() + (1.0 - f).ln()),
    }
}

/// Saturating generator form `log(1 - d_fake)`.
pub fn saturating_generator_loss(d_fake: f64) -> f64 {
    (1.0 - d_fake.clamp(CLAMP, 1.0 - CLAMP)).ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient on the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (lse - logits[label], grad)
}

/// Mean squared error.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgan_at_half() {
        let l = cgan_losses(0.5, 0.5);
        assert!((l.discriminator - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((l.generator - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cgan_optimum_and_clamp() {
        let l = cgan_losses(1.0 - 1e-12, 1e-12);
        assert!(l.discriminator < 1e-6);
        let l = cgan_losses(0.0, 1.0);
        assert!(l.discriminator.is_finite() && l.generator.is_finite());
    }

    #[test]
    fn softmax_sums_to_one_and_shift_invariant() {
        let z = [1.0, -3.0, 0.5, 7.0];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.0).collect();
        assert_eq!(argmax(&p), argmax(&softmax(&shifted)));
    }

    #[test]
    fn cross_entropy_gradient() {
        let z = [0.2, -0.4, 1.1];
        let (_, g) = cross_entropy(&z, 1);
        for i in 0..3 {
            let mut zp = z;
            zp[i] += 1e-6;
            let mut zm = z;
            zm[i] -= 1e-6;
            let fd = (cross_entropy(&zp, 1).0 - cross_entropy(&zm, 1).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }
}
