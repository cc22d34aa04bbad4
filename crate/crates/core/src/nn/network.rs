use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use crate::error::{BendError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative evaluated at the pre-activation input `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(BendError::input(format!("unknown activation '{other}'"))),
        }
    }
}

/// Which half of a dense layer a parameter block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Weights,
    Bias,
}

/// One layer computing `σ(X)·W + b`: the activation acts on the layer's
/// input, and the affine map follows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor2D,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Tensor2D, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(BendError::shape(format!(
                "bias length {} does not match {} output columns",
                bias.len(),
                weights.cols()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Tensor2D::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    pub fn params(&self, kind: ParamKind) -> &[f64] {
        match kind {
            ParamKind::Weights => self.weights.data(),
            ParamKind::Bias => &self.bias,
        }
    }

    pub fn params_mut(&mut self, kind: ParamKind) -> &mut [f64] {
        match kind {
            ParamKind::Weights => self.weights.data_mut(),
            ParamKind::Bias => &mut self.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    names: Vec<String>,
}

/// Per-layer tensors recorded by [`Network::forward`] for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Raw layer inputs X^(l).
    pub inputs: Vec<Tensor2D>,
    /// Activated inputs σ(X^(l)).
    pub activated: Vec<Tensor2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Tensor2D,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn params(&self, kind: ParamKind) -> &[f64] {
        match kind {
            ParamKind::Weights => self.weights.data(),
            ParamKind::Bias => &self.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.is_finite() && g.bias.iter().all(|v| v.is_finite()))
    }
}

impl Network {
    /// Builds a network from explicit layers with names `fc0`, `fc1`, ...
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let names = (0..layers.len()).map(|i| format!("fc{i}")).collect();
        Network::with_names(layers, names)
    }

    pub fn with_names(layers: Vec<DenseLayer>, names: Vec<String>) -> Result<Self> {
        if layers.is_empty() {
            return Err(BendError::input("network needs at least one layer"));
        }
        if names.len() != layers.len() {
            return Err(BendError::input("one name per layer required"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(BendError::shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(BendError::input(format!("duplicate layer name '{n}'")));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weights.cols() {
                return Err(BendError::shape("bias length does not match weights"));
            }
        }
        Ok(Network { layers, names })
    }

    /// Randomly initialised multilayer network over `widths`
    /// (`widths[0]` inputs, `widths.last()` outputs).
    ///
    /// The first layer uses the identity activation so raw inputs reach the
    /// affine map undistorted; later layers apply `hidden` to their input.
    /// Weights are Glorot-uniform, biases zero.
    pub fn new(widths: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(BendError::input(format!(
                "network widths {widths:?} need ≥2 positive entries"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                let act = if i == 0 { Activation::Identity } else { hidden };
                DenseLayer {
                    weights: Tensor2D::from_vec(fan_in, fan_out, data).expect("sized"),
                    bias: vec![0.0; fan_out],
                    activation: act,
                }
            })
            .collect();
        Network::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Layer widths `[inputs, out_0, out_1, ...]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(DenseLayer::outputs));
        w
    }

    pub fn forward(&self, x: &Tensor2D) -> Result<(Tensor2D, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(BendError::shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut activated = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let act = current.map(|v| layer.activation.apply(v));
            let mut out = act.matmul(&layer.weights)?;
            out.add_row_vector(&layer.bias)?;
            inputs.push(current);
            activated.push(act);
            current = out;
        }
        Ok((current, ForwardCache { inputs, activated }))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, x: &Tensor2D) -> Result<Tensor2D> {
        let mut current = x.clone();
        if x.cols() != self.input_dim() {
            return Err(BendError::shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        for layer in &self.layers {
            let act = current.map(|v| layer.activation.apply(v));
            current = act.matmul(&layer.weights)?;
            current.add_row_vector(&layer.bias)?;
        }
        Ok(current)
    }

    pub fn classify(&self, x: &Tensor2D) -> Result<Vec<usize>> {
        Ok(self.predict(x)?.argmax_rows())
    }

    /// Backpropagates `loss_grad` (∂loss/∂output) through the cached pass.
    ///
    /// Returns parameter gradients and ∂loss/∂input.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Tensor2D) -> Result<(Gradients, Tensor2D)> {
        if cache.inputs.len() != self.layers.len() || cache.activated.len() != self.layers.len() {
            return Err(BendError::shape("forward cache does not belong to this network"));
        }
        for (layer, (inp, act)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.activated)) {
            if inp.cols() != layer.inputs() || act.shape() != inp.shape() {
                return Err(BendError::shape("stale forward cache"));
            }
        }
        let batch = cache.inputs[0].rows();
        if loss_grad.shape() != (batch, self.output_dim()) {
            return Err(BendError::shape(format!(
                "loss gradient {:?} vs output ({batch}, {})",
                loss_grad.shape(),
                self.output_dim()
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = &cache.activated[i];
            let inp = &cache.inputs[i];
            let dw = act.t_matmul(&upstream)?;
            let db = upstream.column_sums();
            let mut dx = upstream.matmul_t(&layer.weights)?;
            if layer.activation != Activation::Identity {
                for (g, &x) in dx.data_mut().iter_mut().zip(inp.data()) {
                    *g *= layer.activation.derivative(x);
                }
            }
            grads.push(LayerGrad { weights: dw, bias: db });
            upstream = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }
}
