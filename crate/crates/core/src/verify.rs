//! Finite-difference verification of every hand-written gradient.
//!
//! Each check builds a small random instance per seed, compares the analytic
//! gradient against central differences and keeps the worst relative error.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gan::loss::triplet_loss;
use crate::gan::objective::{discriminator_objective, generator_objective, DiscriminatorBatch, GeneratorBatch};
use crate::gan::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, NoiseMode};
use crate::nn::{derived_rng, gaussian_matrix, gradient_check, Activation, Matrix, Mlp, Rng, FD_STEP, GRAD_TOLERANCE};

/// Outcome of one gradient over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub seeds: usize,
    pub worst_relative_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst_relative_error < GRAD_TOLERANCE
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} seeds={} worst_rel_err={:.3e}",
            if self.passed() { "ok  " } else { "FAIL" },
            self.name,
            self.seeds,
            self.worst_relative_error
        )
    }
}

const VISUAL: usize = 5;
const SEMANTIC: usize = 4;
const CLASSES: usize = 3;
const BATCH: usize = 4;

fn labels(rng: &mut Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..CLASSES)).collect()
}

fn sets(rng: &mut Rng, n: usize, rows: usize, center: f64) -> Vec<Matrix> {
    (0..n)
        .map(|_| gaussian_matrix(rows, VISUAL, 1.0, rng).map(|v| v + center))
        .collect()
}

fn discriminator(rng: &mut Rng) -> Result<Discriminator> {
    Discriminator::new(
        &DiscriminatorConfig {
            visual_dim: VISUAL,
            hidden_dim: 6,
            num_classes: CLASSES,
        },
        rng,
    )
}

fn check_mlp(rng: &mut Rng) -> Result<f64> {
    let net = Mlp::glorot(
        &[4, 6, 5, 3],
        &[Activation::leaky_relu(), Activation::Tanh, Activation::Identity],
        rng,
    )?;
    let x = gaussian_matrix(BATCH, 4, 1.0, rng);
    let w = gaussian_matrix(BATCH, 3, 1.0, rng);
    // loss = Σ w ⊙ net(x), so dL/dy = w
    let loss = |p: &Mlp| {
        let y = p.predict(&x).expect("shapes fixed");
        y.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    };
    let (_, cache) = net.forward(&x)?;
    let (grads, _) = net.backward(&cache, &w)?;
    Ok(gradient_check(&net, &grads, loss, FD_STEP))
}

fn check_triplet(rng: &mut Rng) -> Result<f64> {
    let anchors = gaussian_matrix(BATCH, VISUAL, 1.0, rng);
    let pos = sets(rng, BATCH, 3, 0.0);
    let neg = sets(rng, BATCH, 3, 0.5);
    let margin = 1.0 + rng.random::<f64>();
    let t = triplet_loss(&anchors, &pos, &neg, margin)?;
    let loss = |a: &Matrix| triplet_loss(a, &pos, &neg, margin).expect("shapes fixed").loss;
    Ok(gradient_check(&anchors, &t.grad, loss, FD_STEP))
}

fn check_generator(rng: &mut Rng) -> Result<f64> {
    let config = GeneratorConfig {
        semantic_dim: SEMANTIC,
        reduce_dim: 4,
        noise_dim: 4,
        hidden_dim: 6,
        visual_dim: VISUAL,
        noise_sigma: 1.0,
        noise_mode: NoiseMode::Additive,
        leaky_slope: 0.2,
    };
    let gen = Generator::new(config, rng)?;
    let disc = discriminator(rng)?;
    let batch = GeneratorBatch {
        semantics: gaussian_matrix(BATCH, SEMANTIC, 1.0, rng).map(f64::abs),
        noise: gen.sample_noise(BATCH, rng),
        real: gaussian_matrix(BATCH, VISUAL, 0.5, rng),
        labels: labels(rng, BATCH),
        positives: sets(rng, BATCH, 2, 0.0),
        negatives: sets(rng, BATCH, 2, 0.3),
    };
    let margin = 1.0;
    let lambda_t = 1.0;
    let (_, grads) = generator_objective(&gen, &disc, &batch, margin, lambda_t)?;
    let loss = |g: &Generator| {
        generator_objective(g, &disc, &batch, margin, lambda_t)
            .expect("shapes fixed")
            .0
            .total
    };
    Ok(gradient_check(&gen, &grads, loss, FD_STEP))
}

fn check_discriminator(rng: &mut Rng) -> Result<f64> {
    let disc = discriminator(rng)?;
    let batch = DiscriminatorBatch {
        real: gaussian_matrix(BATCH, VISUAL, 1.0, rng),
        fake: gaussian_matrix(BATCH, VISUAL, 1.0, rng),
        labels: labels(rng, BATCH),
        epsilon: (0..BATCH).map(|_| rng.random()).collect(),
    };
    let (_, grads) = discriminator_objective(&disc, &batch, 0.0)?;
    let loss = |d: &Discriminator| discriminator_objective(d, &batch, 0.0).expect("shapes fixed").0.total;
    Ok(gradient_check(&disc, &grads, loss, FD_STEP))
}

fn check_penalty(rng: &mut Rng) -> Result<f64> {
    let disc = discriminator(rng)?;
    let x = gaussian_matrix(BATCH, VISUAL, 1.0, rng);
    let (_, grads) = disc.gradient_penalty(&x)?;
    let loss = |d: &Discriminator| d.gradient_penalty(&x).expect("shapes fixed").0;
    Ok(gradient_check(&disc, &grads, loss, FD_STEP))
}

type Check = fn(&mut Rng) -> Result<f64>;

const CHECKS: [(&str, Check); 5] = [
    ("mlp_backward", check_mlp),
    ("triplet_loss", check_triplet),
    ("generator_loss", check_generator),
    ("discriminator_loss", check_discriminator),
    ("gradient_penalty", check_penalty),
];

/// Runs every check on seeds `base_seed..base_seed + seeds`.
pub fn gradient_suite(seeds: usize, base_seed: u64) -> Result<Vec<CheckResult>> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut worst = 0.0_f64;
            for s in 0..seeds as u64 {
                let mut rng = derived_rng(base_seed.wrapping_add(s), 100 + i as u64);
                worst = worst.max(check(&mut rng)?);
            }
            Ok(CheckResult {
                name: name.to_string(),
                seeds,
                worst_relative_error: worst,
            })
        })
        .collect()
}
