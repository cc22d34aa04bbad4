use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::cross_entropy_loss;
use super::network::Network;
use super::optim::{optimizer_step, OptimizerState, TrainConfig, Trainable};
use super::tensor::Tensor2D;
use crate::error::{BendError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Shuffled mini-batch index lists for one epoch.
///
/// Each epoch draws from its own ChaCha stream of `seed`.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

pub fn accuracy(net: &Network, x: &Tensor2D, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(BendError::input("empty evaluation set"));
    }
    let pred = net.classify(x)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mini-batch classification training (FP → BP → PU) with softmax
/// cross-entropy.
pub fn train(net: &mut Network, x: &Tensor2D, labels: &[usize], config: &TrainConfig) -> Result<Vec<EpochMetrics>> {
    train_masked(net, x, labels, config, &Trainable::All)
}

/// Like [`train`] but only updates the blocks in `trainable`.
pub fn train_masked(
    net: &mut Network,
    x: &Tensor2D,
    labels: &[usize],
    config: &TrainConfig,
    trainable: &Trainable,
) -> Result<Vec<EpochMetrics>> {
    train_with_callback(net, x, labels, config, trainable, |_, _| Ok(()))
}

/// Masked training that invokes `on_epoch` with the network state after
/// every completed epoch.
pub fn train_with_callback<F>(
    net: &mut Network,
    x: &Tensor2D,
    labels: &[usize],
    config: &TrainConfig,
    trainable: &Trainable,
    mut on_epoch: F,
) -> Result<Vec<EpochMetrics>>
where
    F: FnMut(&Network, &EpochMetrics) -> Result<()>,
{
    config.validate()?;
    if x.rows() == 0 || labels.is_empty() {
        return Err(BendError::input("empty training set"));
    }
    if x.rows() != labels.len() {
        return Err(BendError::shape(format!(
            "{} feature rows vs {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let mut state = OptimizerState::new(net);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch in epoch_batches(x.rows(), config.batch_size, config.seed, epoch) {
            let bx = x.select_rows(&batch);
            let by: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (logits, cache) = net.forward(&bx)?;
            let (loss, grad) = cross_entropy_loss(&logits, &by)?;
            if !loss.is_finite() {
                return Err(BendError::numeric(format!("non-finite loss at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            hits += logits.argmax_rows().iter().zip(&by).filter(|(p, l)| p == l).count();
            let (grads, _) = net.backward(&cache, &grad)?;
            optimizer_step(net, &grads, config, &mut state, trainable)?;
        }
        let metrics = EpochMetrics {
            epoch,
            loss: loss_sum / x.rows() as f64,
            accuracy: hits as f64 / x.rows() as f64,
        };
        on_epoch(net, &metrics)?;
        history.push(metrics);
    }
    Ok(history)
}
