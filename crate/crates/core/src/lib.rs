//! Sparse autoencoders with a nonnegativity-promoting penalty on encoder and
//! decoder weights, greedy layerwise stacking, softmax classification and
//! joint fine-tuning.
//!
//! All training is full-batch gradient descent on dense `f64` matrices and is
//! bit-for-bit deterministic for a given seed.

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod export;
pub mod hyperparams;
pub mod matrix;
pub mod metrics;
pub mod params;
pub mod penalty;
pub mod rng;
pub mod training;

pub use autoencoder::{ae_forward, ae_grad, ae_loss, ae_loss_and_grad, kl_term, AeGrads, AeParams, LossBreakdown};
pub use data::{subset_by_labels, Dataset};
pub use error::{Error, Result};
pub use hyperparams::Hyperparams;
pub use matrix::Matrix;
pub use metrics::{kl_sparsity_measure, nonneg_fraction, reconstruction_error, weight_histogram, HistogramSpec};
pub use penalty::{penalty, penalty_grad, penalty_sum};
pub use rng::Rng;
pub use training::{
    evaluate_accuracy, finetune, network_loss_and_grad, predict, softmax_loss_and_grad, stack_pretrain, train_ae,
    train_softmax, EpochRecord, NetworkGrads, SoftmaxLayer, StackedNetwork, TrainReport,
};
