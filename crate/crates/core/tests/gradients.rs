mod common;

use common::{check_sample, scaled_model, small_check_configs};
use evkit::toyml::gradcheck::{grad_check_scaled, CheckedLoss};
use evkit::toyml::{grad_check, linear_quadratic_check, ModelDims};

#[test]
fn full_size_pipeline_gradients() {
    let dims = ModelDims::default();
    for seed in 0..3 {
        let m = scaled_model(&dims, seed, 5.0);
        let r = grad_check(&m, &check_sample(&dims, seed), 1e-5, seed).unwrap();
        assert!(r.max_error() < 1e-4, "{:?}", r.per_loss);
    }
}

#[test]
fn small_configurations_gradients() {
    for (seed, (dims, use_lstm)) in small_check_configs().into_iter().enumerate() {
        let seed = seed as u64;
        let mut m = scaled_model(&dims, seed, 20.0);
        m.use_lstm = use_lstm;
        let r = grad_check(&m, &check_sample(&dims, seed), 1e-5, seed).unwrap();
        assert!(r.max_error() < 1e-4, "seed {seed}: {:?}", r.per_loss);
    }
}

#[test]
fn linear_quadratic_control_is_tight() {
    for seed in 0..10 {
        let e = linear_quadratic_check(seed, 1e-5);
        assert!(e < 1e-9, "seed {seed}: {e}");
    }
}

#[test]
fn corrupted_gradient_is_caught() {
    let dims = ModelDims::default();
    let m = scaled_model(&dims, 1, 5.0);
    let r = grad_check_scaled(&m, &check_sample(&dims, 1), 1e-5, 1, 1.01).unwrap();
    for (loss, e) in &r.per_loss {
        assert!(*e > 1e-3, "{loss:?} passed with a corrupted gradient: {e}");
    }
    assert_eq!(r.per_loss.len(), CheckedLoss::ALL.len());
}
