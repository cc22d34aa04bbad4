//! Dense feed-forward networks with backprop, losses and optimizers.
//!
//! Every layer computes `σ(X)·W + b`: the activation is applied to the
//! layer input before the affine map, so a network's final output is an
//! unactivated affine response (logits for classifiers).

mod loss;
mod network;
mod optim;
mod tensor;
mod train;

pub use loss::{cross_entropy_loss, mse_loss};
pub use network::{Activation, DenseLayer, ForwardCache, Gradients, LayerGrad, Network, ParamKind};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState, TrainConfig, Trainable};
pub use tensor::Tensor2D;
pub use train::{accuracy, epoch_batches, train, train_masked, train_with_callback, EpochMetrics};
