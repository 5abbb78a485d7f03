//! Small dense networks in 64-bit floats: a representation encoder, an image
//! decoder and pair discriminator for reconstruction pretraining, and an LSTM
//! sequence head for classification.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use gradcheck::{grad_check, linear_quadratic_check, CheckSample, GradCheckReport};
pub use loss::{cgan_losses, cross_entropy, softmax, CganLosses};
pub use model::{classify, encoder_forward, init_model, prepare_input, prepare_target, reconstruct, ModelDims, ToyModel};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    evaluate, evaluate_predictions, pretrain, reconstruction_error, train, EncoderMode, Evaluation, MetricRow,
    PretrainLoss, ReconPair, Sample, TrainConfig,
};
