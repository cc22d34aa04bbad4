//! Autoencoder mapping flattened parameter subsets to a small latent space.
//!
//! Inputs are standardised per dimension over the snapshot family, then
//! passed through a 4-layer encoder and a 4-layer decoder. Training adds
//! fresh Gaussian noise to every input presentation and minimises the mean
//! squared reconstruction error against the clean input.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BendError, Result};
use crate::nn::{
    epoch_batches, mse_loss, optimizer_step, Activation, Network, OptimizerState, Tensor2D, TrainConfig, Trainable,
};
use crate::subset::{ParamVector, SnapshotFamily, SubsetLayout};

const STD_FLOOR: f64 = 1e-8;

/// Per-dimension standardisation fitted on a snapshot family.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| BendError::input("cannot fit a normalizer on no data"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(BendError::shape("ragged rows in normalizer fit"));
            }
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Normalizer { mean, std })
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(BendError::shape("normalizer mean/std length mismatch"));
        }
        if std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(BendError::input("normalizer std entries must be positive"));
        }
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub values: Vec<f64>,
}

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BendError::numeric("non-finite latent value"));
        }
        Ok(LatentCode { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderConfig {
    /// Defaults to `min(64, ⌈d/8⌉)`.
    pub latent_dim: Option<usize>,
    /// Input noise std in normalised units.
    pub noise_sigma: f64,
    /// Hidden width of encoder and decoder; defaults to `clamp(4·latent, 32, 512)`.
    pub hidden_width: Option<usize>,
    pub train: TrainConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            latent_dim: None,
            noise_sigma: 1e-3,
            hidden_width: None,
            train: TrainConfig {
                epochs: 2000,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
        }
    }
}

pub fn default_latent_dim(d: usize) -> usize {
    d.div_ceil(8).clamp(1, 64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Network,
    pub decoder: Network,
    pub latent_dim: usize,
    pub normalizer: Normalizer,
    pub layout: Arc<SubsetLayout>,
    pub seed: u64,
}

fn four_layer(widths: [usize; 5], seed: u64) -> Result<Network> {
    Network::new(&widths, Activation::Tanh, seed)
}

impl AutoencoderModel {
    /// Assembles a model from parts, checking that dimensions line up.
    pub fn from_parts(
        encoder: Network,
        decoder: Network,
        normalizer: Normalizer,
        layout: Arc<SubsetLayout>,
        seed: u64,
    ) -> Result<Self> {
        let d = layout.total_dim;
        let latent_dim = encoder.output_dim();
        if encoder.input_dim() != d || normalizer.dim() != d || decoder.output_dim() != d {
            return Err(BendError::shape(format!(
                "autoencoder parts disagree with subset dimension {d}"
            )));
        }
        if decoder.input_dim() != latent_dim {
            return Err(BendError::shape(format!(
                "encoder emits {latent_dim} latents but decoder expects {}",
                decoder.input_dim()
            )));
        }
        Ok(AutoencoderModel {
            encoder,
            decoder,
            latent_dim,
            normalizer,
            layout,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layout.total_dim
    }

    pub fn encode(&self, vec: &ParamVector) -> Result<LatentCode> {
        Ok(self.encode_batch(std::slice::from_ref(vec))?.remove(0))
    }

    pub fn encode_batch(&self, vecs: &[ParamVector]) -> Result<Vec<LatentCode>> {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(vecs.len() * d);
        for v in vecs {
            if v.dim() != d {
                return Err(BendError::shape(format!(
                    "parameter vector of dimension {} vs autoencoder input {d}",
                    v.dim()
                )));
            }
            data.extend(self.normalizer.normalize(&v.values));
        }
        let z = self.encoder.predict(&Tensor2D::from_vec(vecs.len(), d, data)?)?;
        (0..z.rows()).map(|r| LatentCode::new(z.row(r).to_vec())).collect()
    }

    pub fn decode(&self, z: &LatentCode) -> Result<ParamVector> {
        Ok(self.decode_batch(std::slice::from_ref(z))?.remove(0))
    }

    pub fn decode_batch(&self, codes: &[LatentCode]) -> Result<Vec<ParamVector>> {
        let mut data = Vec::with_capacity(codes.len() * self.latent_dim);
        for c in codes {
            if c.dim() != self.latent_dim {
                return Err(BendError::shape(format!(
                    "latent code of dimension {} vs {}",
                    c.dim(),
                    self.latent_dim
                )));
            }
            data.extend_from_slice(&c.values);
        }
        let out = self
            .decoder
            .predict(&Tensor2D::from_vec(codes.len(), self.latent_dim, data)?)?;
        (0..out.rows())
            .map(|r| ParamVector::new(Arc::clone(&self.layout), self.normalizer.denormalize(out.row(r))))
            .collect()
    }

    /// Mean squared reconstruction error in normalised space.
    pub fn reconstruction_mse(&self, vec: &ParamVector) -> Result<f64> {
        let z = self.encode(vec)?;
        let x = self.normalizer.normalize(&vec.values);
        let out = self
            .decoder
            .predict(&Tensor2D::from_vec(1, self.latent_dim, z.values)?)?;
        Ok(x.iter().zip(out.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct AutoencoderTraining {
    pub model: AutoencoderModel,
    /// Mean reconstruction loss per epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_autoencoder(family: &SnapshotFamily, config: &AutoencoderConfig) -> Result<AutoencoderTraining> {
    config.train.validate()?;
    if family.snapshots.is_empty() {
        return Err(BendError::input("cannot train an autoencoder on an empty family"));
    }
    let d = family.layout.total_dim;
    let latent_dim = config.latent_dim.unwrap_or_else(|| default_latent_dim(d));
    if latent_dim == 0 {
        return Err(BendError::input("latent_dim must be ≥ 1"));
    }
    if latent_dim > d {
        return Err(BendError::input(format!(
            "latent_dim {latent_dim} exceeds subset dimension {d}"
        )));
    }
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(BendError::input("noise_sigma must be finite and non-negative"));
    }
    let hidden = config.hidden_width.unwrap_or((4 * latent_dim).clamp(32, 512));
    let seed = config.train.seed;

    let rows: Vec<&[f64]> = family.snapshots.iter().map(|s| s.values.as_slice()).collect();
    let normalizer = Normalizer::fit(&rows)?;
    let clean: Vec<Vec<f64>> = rows.iter().map(|r| normalizer.normalize(r)).collect();

    let mut encoder = four_layer([d, hidden, hidden, hidden, latent_dim], seed)?;
    let mut decoder = four_layer([latent_dim, hidden, hidden, hidden, d], seed.wrapping_add(1))?;
    let mut enc_state = OptimizerState::new(&encoder);
    let mut dec_state = OptimizerState::new(&decoder);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(u64::MAX);

    let k = clean.len();
    let mut epoch_losses = Vec::with_capacity(config.train.epochs);
    for epoch in 0..config.train.epochs {
        let mut total = 0.0;
        for batch in epoch_batches(k, config.train.batch_size, seed, epoch) {
            let mut target = Vec::with_capacity(batch.len() * d);
            for &i in &batch {
                target.extend_from_slice(&clean[i]);
            }
            let target = Tensor2D::from_vec(batch.len(), d, target)?;
            let mut noisy = target.clone();
            if config.noise_sigma > 0.0 {
                for v in noisy.data_mut() {
                    let z: f64 = noise_rng.sample(StandardNormal);
                    *v += config.noise_sigma * z;
                }
            }
            let (latent, enc_cache) = encoder.forward(&noisy)?;
            let (recon, dec_cache) = decoder.forward(&latent)?;
            let (loss, grad) = mse_loss(&recon, &target)?;
            if !loss.is_finite() {
                return Err(BendError::numeric(format!(
                    "autoencoder loss diverged at epoch {epoch}"
                )));
            }
            total += loss * batch.len() as f64;
            let (dec_grads, latent_grad) = decoder.backward(&dec_cache, &grad)?;
            let (enc_grads, _) = encoder.backward(&enc_cache, &latent_grad)?;
            optimizer_step(&mut decoder, &dec_grads, &config.train, &mut dec_state, &Trainable::All)?;
            optimizer_step(&mut encoder, &enc_grads, &config.train, &mut enc_state, &Trainable::All)?;
        }
        epoch_losses.push(total / k as f64);
    }

    let model = AutoencoderModel::from_parts(encoder, decoder, normalizer, Arc::clone(&family.layout), seed)?;
    Ok(AutoencoderTraining { model, epoch_losses })
}
