//! Central finite-difference oracles shared by the gradient tests and the
//! acceptance target.

#![allow(dead_code)]

use bend_core::ddpm::{denoising_loss, make_schedule, DenoiserNet};
use bend_core::nn::{cross_entropy_loss, mse_loss, Activation, DenseLayer, Network, ParamKind, Tensor2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, 1e-6)`; the floor keeps near-zero gradients
/// from inflating the ratio.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2D {
    Tensor2D::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn random_network(rng: &mut ChaCha8Rng, widths: &[usize]) -> Network {
    let acts = [
        Activation::Identity,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
    ];
    let layers = widths
        .windows(2)
        .map(|w| {
            let act = acts[rng.random_range(0..acts.len())];
            let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            DenseLayer::new(uniform(rng, w[0], w[1]), bias, act).unwrap()
        })
        .collect();
    Network::from_layers(layers).unwrap()
}

fn central<F: FnMut(f64) -> f64>(x: f64, mut f: F) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Largest relative error between `Network::backward` and finite
/// differences of `L = Σ G ⊙ net(X)`, over every parameter and input.
pub fn network_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=4)).collect();
    let batch = rng.random_range(1..=3);
    let mut net = random_network(&mut rng, &widths);
    let x = uniform(&mut rng, batch, widths[0]);
    let g = uniform(&mut rng, batch, *widths.last().unwrap());

    let objective = |net: &Network, x: &Tensor2D| -> f64 {
        let y = net.predict(x).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = net.forward(&x).unwrap();
    let (grads, input_grad) = net.backward(&cache, &g).unwrap();

    let mut worst: f64 = 0.0;
    for l in 0..net.layers().len() {
        for kind in [ParamKind::Weights, ParamKind::Bias] {
            for i in 0..net.layers()[l].params(kind).len() {
                let analytic = grads.layers[l].params(kind)[i];
                let orig = net.layers()[l].params(kind)[i];
                let numeric = central(orig, |v| {
                    net.layers_mut()[l].params_mut(kind)[i] = v;
                    objective(&net, &x)
                });
                net.layers_mut()[l].params_mut(kind)[i] = orig;
                worst = worst.max(rel_err(analytic, numeric));
            }
        }
    }
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        let numeric = central(orig, |v| {
            xp.data_mut()[i] = v;
            objective(&net, &xp)
        });
        xp.data_mut()[i] = orig;
        worst = worst.max(rel_err(input_grad.data()[i], numeric));
    }
    worst
}

pub fn cross_entropy_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, c) = (rng.random_range(1..=4), rng.random_range(2..=5));
    let logits = uniform(&mut rng, b, c).map(|v| 3.0 * v);
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
    let (_, grad) = cross_entropy_loss(&logits, &labels).unwrap();
    let mut work = logits.clone();
    (0..logits.data().len())
        .map(|i| {
            let numeric = central(logits.data()[i], |v| {
                work.data_mut()[i] = v;
                cross_entropy_loss(&work, &labels).unwrap().0
            });
            work.data_mut()[i] = logits.data()[i];
            rel_err(grad.data()[i], numeric)
        })
        .fold(0.0, f64::max)
}

pub fn mse_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=4));
    let pred = uniform(&mut rng, r, c);
    let target = uniform(&mut rng, r, c);
    let (_, grad) = mse_loss(&pred, &target).unwrap();
    let mut work = pred.clone();
    (0..pred.data().len())
        .map(|i| {
            let numeric = central(pred.data()[i], |v| {
                work.data_mut()[i] = v;
                mse_loss(&work, &target).unwrap().0
            });
            work.data_mut()[i] = pred.data()[i];
            rel_err(grad.data()[i], numeric)
        })
        .fold(0.0, f64::max)
}

/// The noise-prediction objective differentiated through a small denoiser
/// with a fixed batch of `(z0, t, ε)`.
pub fn denoising_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = rng.random_range(1..=3);
    let embed = 4;
    let hidden = rng.random_range(2..=5);
    let core = random_network(&mut rng, &[latent + embed, hidden, latent]);
    let mut denoiser = DenoiserNet::new(core, embed).unwrap();
    let schedule = make_schedule(10, 1e-3, 0.2).unwrap();
    let batch = rng.random_range(1..=3);
    let z0 = uniform(&mut rng, batch, latent);
    let eps = uniform(&mut rng, batch, latent);
    let ts: Vec<usize> = (0..batch).map(|_| rng.random_range(1..=10)).collect();

    let (_, grads) = denoising_loss(&denoiser, &schedule, &z0, &ts, &eps).unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..denoiser.core.layers().len() {
        for kind in [ParamKind::Weights, ParamKind::Bias] {
            for i in 0..denoiser.core.layers()[l].params(kind).len() {
                let orig = denoiser.core.layers()[l].params(kind)[i];
                let numeric = central(orig, |v| {
                    denoiser.core.layers_mut()[l].params_mut(kind)[i] = v;
                    denoising_loss(&denoiser, &schedule, &z0, &ts, &eps).unwrap().0
                });
                denoiser.core.layers_mut()[l].params_mut(kind)[i] = orig;
                worst = worst.max(rel_err(grads.layers[l].params(kind)[i], numeric));
            }
        }
    }
    worst
}

pub const INSTANCES: u64 = 25;

type Family = (&'static str, fn(u64) -> f64);

/// Worst error per family over `INSTANCES` seeded instances.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    let families: [Family; 4] = [
        ("network", network_instance),
        ("cross_entropy", cross_entropy_instance),
        ("mse", mse_instance),
        ("denoising", denoising_instance),
    ];
    families
        .iter()
        .map(|(name, f)| (*name, (0..INSTANCES).map(f).fold(0.0, f64::max)))
        .collect()
}
