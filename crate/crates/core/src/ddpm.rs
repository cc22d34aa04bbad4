//! DDPM over autoencoder latents: linear β schedule, ε-prediction training
//! and ancestral sampling with fixed covariance `β_t·I`.
//!
//! Timesteps are 1-based throughout (`t ∈ [1, T]`); arrays are indexed by
//! `t − 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{AutoencoderModel, LatentCode};
use crate::error::{BendError, Result};
use crate::nn::{
    epoch_batches, mse_loss, optimizer_step, Activation, Gradients, Network, OptimizerState, Tensor2D, TrainConfig,
    Trainable,
};
use crate::subset::inject;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

/// Linearly spaced β from `beta_start` to `beta_end` over `timesteps` steps.
pub fn make_schedule(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if timesteps == 0 {
        return Err(BendError::input("schedule needs T ≥ 1"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(BendError::input(format!(
            "need 0 < beta_start ≤ beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let beta = if timesteps == 1 {
        vec![beta_start]
    } else {
        let step = (beta_end - beta_start) / (timesteps - 1) as f64;
        (0..timesteps).map(|i| beta_start + step * i as f64).collect()
    };
    NoiseSchedule::from_betas(beta)
}

impl NoiseSchedule {
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(BendError::input("schedule needs T ≥ 1"));
        }
        if let Some(b) = beta.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(BendError::input(format!("beta {b} outside (0, 1)")));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule { beta, alpha, alpha_bar })
    }

    pub fn timesteps(&self) -> usize {
        self.beta.len()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps() {
            return Err(BendError::input(format!(
                "timestep {t} outside [1, {}]",
                self.timesteps()
            )));
        }
        Ok(())
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha_at(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar_at(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    /// Whether the forward process ends close to pure noise (`ᾱ_T < 0.05`).
    pub fn reaches_noise(&self) -> bool {
        self.alpha_bar[self.alpha_bar.len() - 1] < 0.05
    }
}

/// `√ᾱ_t·z0 + √(1−ᾱ_t)·eps`
pub fn q_sample(z0: &[f64], t: usize, eps: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    schedule.check_t(t)?;
    if z0.len() != eps.len() {
        return Err(BendError::shape("latent and noise lengths differ"));
    }
    let ab = schedule.alpha_bar_at(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z0.iter().zip(eps).map(|(z, e)| a * z + b * e).collect())
}

/// Sinusoidal embedding: `dim/2` sines followed by `dim/2` cosines with
/// geometrically spaced frequencies; an odd trailing slot stays zero.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        let arg = t as f64 * freq;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    out
}

/// Anything that predicts the noise in a batch of latents at step `t`.
pub trait NoisePredictor {
    fn predict_noise(&self, z: &Tensor2D, t: usize) -> Result<Tensor2D>;
}

/// ε-prediction network over `[latent | time embedding]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNet {
    pub core: Network,
    pub time_embed_dim: usize,
}

impl DenoiserNet {
    pub fn new(core: Network, time_embed_dim: usize) -> Result<Self> {
        if core.input_dim() <= time_embed_dim {
            return Err(BendError::shape("denoiser input must exceed the time embedding"));
        }
        if core.output_dim() != core.input_dim() - time_embed_dim {
            return Err(BendError::shape(format!(
                "denoiser outputs {} but latent dimension is {}",
                core.output_dim(),
                core.input_dim() - time_embed_dim
            )));
        }
        Ok(DenoiserNet { core, time_embed_dim })
    }

    /// Dense denoiser with two hidden layers of `hidden` units.
    pub fn init(
        latent_dim: usize,
        time_embed_dim: usize,
        hidden: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let core = Network::new(
            &[latent_dim + time_embed_dim, hidden, hidden, latent_dim],
            activation,
            seed,
        )?;
        DenoiserNet::new(core, time_embed_dim)
    }

    pub fn latent_dim(&self) -> usize {
        self.core.output_dim()
    }

    pub fn build_input(&self, z: &Tensor2D, ts: &[usize]) -> Result<Tensor2D> {
        if z.cols() != self.latent_dim() || ts.len() != z.rows() {
            return Err(BendError::shape(format!(
                "denoiser got {:?} latents with {} timesteps",
                z.shape(),
                ts.len()
            )));
        }
        let mut emb = Vec::with_capacity(ts.len() * self.time_embed_dim);
        for &t in ts {
            emb.extend(time_embedding(t, self.time_embed_dim));
        }
        z.hconcat(&Tensor2D::from_vec(ts.len(), self.time_embed_dim, emb)?)
    }

    pub fn predict_at(&self, z: &Tensor2D, ts: &[usize]) -> Result<Tensor2D> {
        self.core.predict(&self.build_input(z, ts)?)
    }
}

impl NoisePredictor for DenoiserNet {
    fn predict_noise(&self, z: &Tensor2D, t: usize) -> Result<Tensor2D> {
        self.predict_at(z, &vec![t; z.rows()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpmConfig {
    pub timesteps: usize,
    /// Defaults to `1e-4 · 1000/T`.
    pub beta_start: Option<f64>,
    /// Defaults to `0.02 · 1000/T` (capped below 1).
    pub beta_end: Option<f64>,
    pub time_embed_dim: usize,
    /// Defaults to `4 · latent_dim`.
    pub hidden_width: Option<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
}

impl Default for DdpmConfig {
    fn default() -> Self {
        DdpmConfig {
            timesteps: 1000,
            beta_start: None,
            beta_end: None,
            time_embed_dim: 16,
            hidden_width: None,
            activation: Activation::Relu,
            train: TrainConfig {
                epochs: 3000,
                batch_size: 64,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
        }
    }
}

impl DdpmConfig {
    /// β range, rescaled from the 1000-step reference range when unset.
    pub fn beta_range(&self) -> (f64, f64) {
        let scale = 1000.0 / self.timesteps.max(1) as f64;
        let start = self.beta_start.unwrap_or((1e-4 * scale).min(0.5));
        let end = self.beta_end.unwrap_or((0.02 * scale).min(0.999)).max(start);
        (start, end)
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        let (start, end) = self.beta_range();
        make_schedule(self.timesteps, start, end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub schedule: NoiseSchedule,
    pub denoiser: DenoiserNet,
    pub latent_dim: usize,
    pub seed: u64,
}

impl DiffusionModel {
    pub fn new(schedule: NoiseSchedule, denoiser: DenoiserNet, seed: u64) -> Self {
        let latent_dim = denoiser.latent_dim();
        DiffusionModel {
            schedule,
            denoiser,
            latent_dim,
            seed,
        }
    }

    pub fn init(latent_dim: usize, config: &DdpmConfig) -> Result<Self> {
        if latent_dim == 0 {
            return Err(BendError::input("latent_dim must be ≥ 1"));
        }
        let hidden = config.hidden_width.unwrap_or(4 * latent_dim);
        let denoiser = DenoiserNet::init(
            latent_dim,
            config.time_embed_dim,
            hidden,
            config.activation,
            config.train.seed,
        )?;
        Ok(DiffusionModel::new(config.schedule()?, denoiser, config.train.seed))
    }
}

/// Noise-prediction objective `mean(‖ε − ε_θ(√ᾱ_t·z0 + √(1−ᾱ_t)·ε, t)‖²)`
/// over one batch, with its gradient with respect to the denoiser.
pub fn denoising_loss(
    denoiser: &DenoiserNet,
    schedule: &NoiseSchedule,
    z0: &Tensor2D,
    ts: &[usize],
    eps: &Tensor2D,
) -> Result<(f64, Gradients)> {
    if z0.shape() != eps.shape() || ts.len() != z0.rows() {
        return Err(BendError::shape("z0, eps and timesteps disagree"));
    }
    let mut noised = Vec::with_capacity(z0.data().len());
    for (r, &t) in ts.iter().enumerate() {
        noised.extend(q_sample(z0.row(r), t, eps.row(r), schedule)?);
    }
    let noised = Tensor2D::from_vec(z0.rows(), z0.cols(), noised)?;
    let input = denoiser.build_input(&noised, ts)?;
    let (pred, cache) = denoiser.core.forward(&input)?;
    let (loss, grad) = mse_loss(&pred, eps)?;
    let (grads, _) = denoiser.core.backward(&cache, &grad)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct DdpmTraining {
    pub model: DiffusionModel,
    pub epoch_losses: Vec<f64>,
}

/// Trains the denoiser by gradient descent on [`denoising_loss`].
///
/// Codes are put in a canonical order first, so the result does not depend
/// on the order they are supplied in.
pub fn train_ddpm(codes: &[LatentCode], mut model: DiffusionModel, config: &TrainConfig) -> Result<DdpmTraining> {
    config.validate()?;
    if codes.is_empty() {
        return Err(BendError::input("no latent codes to train on"));
    }
    let dim = model.latent_dim;
    if let Some(c) = codes.iter().find(|c| c.dim() != dim) {
        return Err(BendError::shape(format!(
            "latent code of dimension {} vs model {dim}",
            c.dim()
        )));
    }
    let mut sorted: Vec<&LatentCode> = codes.iter().collect();
    sorted.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let timesteps = model.schedule.timesteps();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    let mut state = OptimizerState::new(&model.denoiser.core);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for batch in epoch_batches(sorted.len(), config.batch_size, config.seed, epoch) {
            let mut z0 = Vec::with_capacity(batch.len() * dim);
            for &i in &batch {
                z0.extend_from_slice(&sorted[i].values);
            }
            let z0 = Tensor2D::from_vec(batch.len(), dim, z0)?;
            let ts: Vec<usize> = (0..batch.len()).map(|_| rng.random_range(1..=timesteps)).collect();
            let eps_data = (0..batch.len() * dim).map(|_| rng.sample(StandardNormal)).collect();
            let eps = Tensor2D::from_vec(batch.len(), dim, eps_data)?;
            let (loss, grads) = denoising_loss(&model.denoiser, &model.schedule, &z0, &ts, &eps)?;
            if !loss.is_finite() {
                return Err(BendError::numeric(format!("diffusion loss diverged at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            optimizer_step(&mut model.denoiser.core, &grads, config, &mut state, &Trainable::All)?;
        }
        epoch_losses.push(total / sorted.len() as f64);
    }
    model.seed = config.seed;
    Ok(DdpmTraining { model, epoch_losses })
}

/// Ancestral sampling from `z_T ~ N(0, I)` down to `z_0`.
///
/// Each step sets `μ = (z_t − β_t/√(1−ᾱ_t)·ε_θ(z_t, t)) / √α_t` and
/// `z_{t−1} = μ + √β_t·η`, with `η = 0` on the last step. Chain `i` draws all
/// of its noise from its own stream seeded with `seed ^ i`.
pub fn p_sample_loop<P: NoisePredictor + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    latent_dim: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<LatentCode>> {
    if n_samples == 0 {
        return Ok(Vec::new());
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..n_samples)
        .map(|i| ChaCha8Rng::seed_from_u64(seed ^ i as u64))
        .collect();
    let mut z = Tensor2D::zeros(n_samples, latent_dim);
    for (r, rng) in rngs.iter_mut().enumerate() {
        for c in 0..latent_dim {
            z.set(r, c, rng.sample(StandardNormal));
        }
    }
    for t in (1..=schedule.timesteps()).rev() {
        let eps = predictor.predict_noise(&z, t)?;
        if eps.shape() != z.shape() {
            return Err(BendError::shape("noise prediction shape differs from latents"));
        }
        let beta = schedule.beta_at(t);
        let coef = beta / (1.0 - schedule.alpha_bar_at(t)).sqrt();
        let sqrt_alpha = schedule.alpha_at(t).sqrt();
        let sigma = beta.sqrt();
        for (r, rng) in rngs.iter_mut().enumerate() {
            for c in 0..latent_dim {
                let mean = (z.get(r, c) - coef * eps.get(r, c)) / sqrt_alpha;
                let next = if t > 1 {
                    let eta: f64 = rng.sample(StandardNormal);
                    mean + sigma * eta
                } else {
                    mean
                };
                z.set(r, c, next);
            }
        }
        if !z.is_finite() {
            return Err(BendError::numeric(format!(
                "sampling produced non-finite latents at t={t}"
            )));
        }
    }
    (0..n_samples).map(|r| LatentCode::new(z.row(r).to_vec())).collect()
}

impl DiffusionModel {
    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<Vec<LatentCode>> {
        p_sample_loop(&self.denoiser, &self.schedule, self.latent_dim, n_samples, seed)
    }
}

/// Samples `m` latents, decodes them, and injects each into a copy of `base`.
pub fn generate_classifiers(
    diffusion: &DiffusionModel,
    autoencoder: &AutoencoderModel,
    base: &Network,
    m: usize,
    seed: u64,
) -> Result<Vec<Network>> {
    if diffusion.latent_dim != autoencoder.latent_dim {
        return Err(BendError::shape(format!(
            "diffusion latent {} vs autoencoder latent {}",
            diffusion.latent_dim, autoencoder.latent_dim
        )));
    }
    autoencoder.layout.check_against(base)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    let codes = diffusion.sample(m, seed)?;
    let params = autoencoder.decode_batch(&codes)?;
    params
        .iter()
        .map(|p| {
            let mut net = base.clone();
            inject(&mut net, p)?;
            Ok(net)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ZeroNoise;

    impl NoisePredictor for ZeroNoise {
        fn predict_noise(&self, z: &Tensor2D, _t: usize) -> Result<Tensor2D> {
            Ok(Tensor2D::zeros(z.rows(), z.cols()))
        }
    }

    #[test]
    fn single_step_schedule() {
        let s = make_schedule(1, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha, vec![0.5]);
        assert_eq!(s.alpha_bar, vec![0.5]);
    }

    #[test]
    fn two_step_product() {
        let s = NoiseSchedule::from_betas(vec![0.1, 0.2]).unwrap();
        assert!((s.alpha_bar[0] - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar[1] - 0.72).abs() < 1e-15);
    }

    #[test]
    fn default_schedule_decays_to_noise() {
        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        assert!(s.reaches_noise());
        assert!(s.alpha_bar.windows(2).all(|w| w[1] < w[0]));
        for (a, b) in s.alpha.iter().zip(&s.beta) {
            assert_eq!(*a, 1.0 - b);
        }
        assert_eq!(DdpmConfig::default().beta_range(), (1e-4, 0.02));
    }

    #[test]
    fn rescaled_short_schedule_decays_to_noise() {
        let cfg = DdpmConfig {
            timesteps: 50,
            ..DdpmConfig::default()
        };
        assert!(cfg.schedule().unwrap().reaches_noise());
    }

    #[test]
    fn schedule_bounds() {
        assert!(make_schedule(0, 0.1, 0.2).is_err());
        assert!(make_schedule(10, 0.0, 0.2).is_err());
        assert!(make_schedule(10, 0.3, 0.2).is_err());
        assert!(make_schedule(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn q_sample_closed_form() {
        let s = NoiseSchedule::from_betas(vec![0.75]).unwrap();
        assert_eq!(q_sample(&[2.0], 1, &[0.0], &s).unwrap(), vec![1.0]);
        let z = q_sample(&[1.0], 1, &[1.0], &s).unwrap();
        assert!((z[0] - (0.5 + 0.75f64.sqrt())).abs() < 1e-15);
        assert!((z[0] - 1.3660254).abs() < 1e-7);
        assert!(q_sample(&[1.0], 2, &[1.0], &s).is_err());
        assert!(q_sample(&[1.0], 0, &[1.0], &s).is_err());
    }

    #[test]
    fn zero_noise_single_step_collapses() {
        let s = NoiseSchedule::from_betas(vec![0.3]).unwrap();
        let out = p_sample_loop(&ZeroNoise, &s, 3, 2, 11).unwrap();
        for (r, code) in out.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(11 ^ r as u64);
            for v in &code.values {
                let z1: f64 = rng.sample(StandardNormal);
                assert_eq!(*v, z1 / 0.7f64.sqrt());
            }
        }
    }

    #[test]
    fn time_embedding_shape() {
        let e = time_embedding(3, 16);
        assert_eq!(e.len(), 16);
        assert_eq!(e[0], 3f64.sin());
        assert_eq!(e[8], 3f64.cos());
        assert_eq!(time_embedding(1, 5)[4], 0.0);
    }

    #[test]
    fn sampling_is_seeded() {
        let model = DiffusionModel::init(
            3,
            &DdpmConfig {
                timesteps: 10,
                ..DdpmConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.sample(4, 1).unwrap(), model.sample(4, 1).unwrap());
        assert_ne!(model.sample(4, 1).unwrap(), model.sample(4, 2).unwrap());
    }

    #[test]
    fn empty_codes_rejected() {
        let model = DiffusionModel::init(3, &DdpmConfig::default()).unwrap();
        assert!(matches!(
            train_ddpm(&[], model, &TrainConfig::default()),
            Err(BendError::Input(_))
        ));
    }

    #[test]
    fn denoiser_dims_checked() {
        let core = Network::new(&[5, 4, 3], Activation::Relu, 0).unwrap();
        assert!(DenoiserNet::new(core, 16).is_err());
        let core = Network::new(&[19, 4, 4], Activation::Relu, 0).unwrap();
        assert!(DenoiserNet::new(core, 16).is_err());
    }
}
