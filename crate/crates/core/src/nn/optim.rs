use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network, ParamKind};
use crate::error::{BendError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(BendError::input("epochs must be ≥ 1"));
        }
        if self.batch_size == 0 {
            return Err(BendError::input("batch_size must be ≥ 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BendError::input("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Parameter blocks an optimizer is allowed to touch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trainable {
    All,
    Only(BTreeSet<(usize, ParamKind)>),
}

impl Trainable {
    pub fn contains(&self, layer: usize, kind: ParamKind) -> bool {
        match self {
            Trainable::All => true,
            Trainable::Only(set) => set.contains(&(layer, kind)),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct BlockState {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Optimizer moment buffers, one pair per (layer, kind) block.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    blocks: Vec<[BlockState; 2]>,
    step: u64,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        let blocks = net
            .layers()
            .iter()
            .map(|l| {
                [
                    BlockState {
                        first: vec![0.0; l.weights.data().len()],
                        second: vec![0.0; l.weights.data().len()],
                    },
                    BlockState {
                        first: vec![0.0; l.bias.len()],
                        second: vec![0.0; l.bias.len()],
                    },
                ]
            })
            .collect();
        OptimizerState { blocks, step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

fn kind_index(kind: ParamKind) -> usize {
    match kind {
        ParamKind::Weights => 0,
        ParamKind::Bias => 1,
    }
}

/// Applies one update to every trainable block of `net`.
///
/// Frozen blocks are skipped entirely, including their moment buffers.
pub fn optimizer_step(
    net: &mut Network,
    grads: &Gradients,
    config: &TrainConfig,
    state: &mut OptimizerState,
    trainable: &Trainable,
) -> Result<()> {
    if grads.layers.len() != net.layers().len() || state.blocks.len() != net.layers().len() {
        return Err(BendError::shape("gradients/state do not match network"));
    }
    for (l, g) in net.layers().iter().zip(&grads.layers) {
        if l.weights.shape() != g.weights.shape() || l.bias.len() != g.bias.len() {
            return Err(BendError::shape("gradient block shape mismatch"));
        }
    }
    if !grads.is_finite() {
        return Err(BendError::numeric("non-finite gradient"));
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = config.learning_rate;
    for (li, layer) in net.layers_mut().iter_mut().enumerate() {
        for kind in [ParamKind::Weights, ParamKind::Bias] {
            if !trainable.contains(li, kind) {
                continue;
            }
            let g = grads.layers[li].params(kind);
            let block = &mut state.blocks[li][kind_index(kind)];
            let params = layer.params_mut(kind);
            match config.optimizer {
                OptimizerKind::Sgd => {
                    for (w, &gi) in params.iter_mut().zip(g) {
                        *w -= lr * gi;
                    }
                }
                OptimizerKind::SgdMomentum => {
                    for ((w, &gi), v) in params.iter_mut().zip(g).zip(block.first.iter_mut()) {
                        *v = config.momentum * *v + gi;
                        *w -= lr * *v;
                    }
                }
                OptimizerKind::Adam => {
                    let bc1 = 1.0 - config.beta1.powi(t);
                    let bc2 = 1.0 - config.beta2.powi(t);
                    for (((w, &gi), m), v) in params
                        .iter_mut()
                        .zip(g)
                        .zip(block.first.iter_mut())
                        .zip(block.second.iter_mut())
                    {
                        *m = config.beta1 * *m + (1.0 - config.beta1) * gi;
                        *v = config.beta2 * *v + (1.0 - config.beta2) * gi * gi;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *w -= lr * m_hat / (v_hat.sqrt() + config.eps);
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::{DenseLayer, LayerGrad};
    use crate::nn::tensor::Tensor2D;

    fn scalar_net(w: f64) -> Network {
        let layer = DenseLayer::new(
            Tensor2D::from_vec(1, 1, vec![w]).unwrap(),
            vec![0.0],
            crate::nn::Activation::Identity,
        )
        .unwrap();
        Network::from_layers(vec![layer]).unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            layers: vec![LayerGrad {
                weights: Tensor2D::from_vec(1, 1, vec![g]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    fn cfg(kind: OptimizerKind, lr: f64) -> TrainConfig {
        TrainConfig {
            optimizer: kind,
            learning_rate: lr,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn sgd_step() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(&net);
        optimizer_step(
            &mut net,
            &scalar_grad(0.5),
            &cfg(OptimizerKind::Sgd, 0.1),
            &mut st,
            &Trainable::All,
        )
        .unwrap();
        assert!((net.layers()[0].weights.get(0, 0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_grad_is_noop() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(&net);
        optimizer_step(
            &mut net,
            &scalar_grad(0.0),
            &cfg(OptimizerKind::Sgd, 0.1),
            &mut st,
            &Trainable::All,
        )
        .unwrap();
        assert_eq!(net.layers()[0].weights.get(0, 0), 1.0);
    }

    #[test]
    fn adam_first_step_matches_hand_evaluation() {
        // t=1: m = (1-β1)g, v = (1-β2)g²; bias correction gives m̂ = 1, v̂ = 1,
        // so the step is lr / (1 + eps).
        let c = cfg(OptimizerKind::Adam, 0.01);
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(&net);
        optimizer_step(&mut net, &scalar_grad(1.0), &c, &mut st, &Trainable::All).unwrap();
        let expected = 1.0 - 0.01 * (1.0 / (1.0 + c.eps));
        assert!((net.layers()[0].weights.get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn momentum_accumulates() {
        let c = TrainConfig {
            momentum: 0.5,
            ..cfg(OptimizerKind::SgdMomentum, 0.1)
        };
        let mut net = scalar_net(0.0);
        let mut st = OptimizerState::new(&net);
        optimizer_step(&mut net, &scalar_grad(1.0), &c, &mut st, &Trainable::All).unwrap();
        optimizer_step(&mut net, &scalar_grad(1.0), &c, &mut st, &Trainable::All).unwrap();
        // v1 = 1, v2 = 1.5 → w = -0.1 - 0.15
        assert!((net.layers()[0].weights.get(0, 0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_rejected_without_mutation() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(&net);
        let r = optimizer_step(
            &mut net,
            &scalar_grad(f64::NAN),
            &cfg(OptimizerKind::Sgd, 0.1),
            &mut st,
            &Trainable::All,
        );
        assert!(matches!(r, Err(BendError::Numeric(_))));
        assert_eq!(net.layers()[0].weights.get(0, 0), 1.0);
    }

    #[test]
    fn frozen_blocks_untouched() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(&net);
        let only_bias = Trainable::Only([(0, ParamKind::Bias)].into_iter().collect());
        optimizer_step(
            &mut net,
            &scalar_grad(3.0),
            &cfg(OptimizerKind::Adam, 0.1),
            &mut st,
            &only_bias,
        )
        .unwrap();
        assert_eq!(net.layers()[0].weights.get(0, 0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
