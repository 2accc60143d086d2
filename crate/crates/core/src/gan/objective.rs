//! Batch objectives with their analytic gradients.

use super::loss::{cross_entropy, discriminator_loss, generator_loss, triplet_loss, wasserstein, CriticPair};
use super::{Discriminator, Generator};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Parameters};

/// Loss value and its parts, as logged.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Losses {
    pub total: f64,
    pub wasserstein: f64,
    pub classification: f64,
    pub triplet: f64,
    pub penalty: f64,
}

impl Losses {
    pub fn is_finite(&self) -> bool {
        [
            self.total,
            self.wasserstein,
            self.classification,
            self.triplet,
            self.penalty,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Everything one generator update consumes. `labels` index the class head;
/// row `i` of `real` shares label `i` with the generated row `i`.
#[derive(Debug, Clone)]
pub struct GeneratorBatch {
    pub semantics: Matrix,
    pub noise: Matrix,
    pub real: Matrix,
    pub labels: Vec<usize>,
    pub positives: Vec<Matrix>,
    pub negatives: Vec<Matrix>,
}

/// Generator objective on a fixed discriminator, and its gradient.
pub fn generator_objective(
    gen: &Generator,
    disc: &Discriminator,
    batch: &GeneratorBatch,
    margin: f64,
    lambda_t: f64,
) -> Result<(Losses, Generator)> {
    let (fake, cache) = gen.forward(&batch.semantics, &batch.noise)?;
    let fo = disc.forward(&fake)?;
    let ro = disc.forward(&batch.real)?;
    let triplet = triplet_loss(&fake, &batch.positives, &batch.negatives, margin)?;
    let pair = CriticPair {
        critic_fake: &fo.critic,
        critic_real: &ro.critic,
        logits_fake: &fo.logits,
        logits_real: &ro.logits,
        labels: &batch.labels,
    };
    let total = generator_loss(pair, triplet.loss, lambda_t)?;
    let (ce_fake, mut d_logits) = cross_entropy(&fo.logits, &batch.labels)?;
    let (ce_real, _) = cross_entropy(&ro.logits, &batch.labels)?;
    d_logits.scale(0.5);
    let m = fake.rows() as f64;
    let (_, mut d_fake) = disc.backward(&fo, &vec![1.0 / m; fake.rows()], &d_logits)?;
    if lambda_t != 0.0 {
        let mut t = triplet.grad;
        t.scale(lambda_t);
        d_fake.add_assign(&t);
    }
    let grads = gen.backward(&cache, &d_fake)?;
    let losses = Losses {
        total,
        wasserstein: wasserstein(&fo.critic, &ro.critic),
        classification: 0.5 * (ce_fake + ce_real),
        triplet: triplet.loss,
        penalty: 0.0,
    };
    Ok((losses, grads))
}

/// Everything one discriminator update consumes. `epsilon[i]` mixes real row
/// `i` with fake row `i` for the gradient penalty.
#[derive(Debug, Clone)]
pub struct DiscriminatorBatch {
    pub real: Matrix,
    pub fake: Matrix,
    pub labels: Vec<usize>,
    pub epsilon: Vec<f64>,
}

impl DiscriminatorBatch {
    pub fn interpolates(&self) -> Matrix {
        let mut x = self.real.clone();
        for (r, &e) in self.epsilon.iter().enumerate() {
            for (v, &f) in x.row_mut(r).iter_mut().zip(self.fake.row(r)) {
                *v = e * *v + (1.0 - e) * f;
            }
        }
        x
    }
}

/// Discriminator objective with the generated batch held fixed, and its
/// gradient. The penalty is skipped entirely when `gp_weight` is zero.
pub fn discriminator_objective(
    disc: &Discriminator,
    batch: &DiscriminatorBatch,
    gp_weight: f64,
) -> Result<(Losses, Discriminator)> {
    if batch.real.shape() != batch.fake.shape() || batch.epsilon.len() != batch.real.rows() {
        return Err(Error::Usage("discriminator batch parts differ in size".into()));
    }
    let fo = disc.forward(&batch.fake)?;
    let ro = disc.forward(&batch.real)?;
    let (penalty, penalty_grad) = if gp_weight != 0.0 {
        let (v, g) = disc.gradient_penalty(&batch.interpolates())?;
        (v, Some(g))
    } else {
        (0.0, None)
    };
    let pair = CriticPair {
        critic_fake: &fo.critic,
        critic_real: &ro.critic,
        logits_fake: &fo.logits,
        logits_real: &ro.logits,
        labels: &batch.labels,
    };
    let total = discriminator_loss(pair, penalty, gp_weight)?;
    let (ce_fake, mut dl_fake) = cross_entropy(&fo.logits, &batch.labels)?;
    let (ce_real, mut dl_real) = cross_entropy(&ro.logits, &batch.labels)?;
    dl_fake.scale(0.5);
    dl_real.scale(0.5);
    let m = batch.real.rows() as f64;
    let (mut grads, _) = disc.backward(&fo, &vec![-1.0 / m; fo.critic.len()], &dl_fake)?;
    let (g_real, _) = disc.backward(&ro, &vec![1.0 / m; ro.critic.len()], &dl_real)?;
    grads.add_scaled(&g_real, 1.0);
    if let Some(g) = penalty_grad {
        grads.add_scaled(&g, gp_weight);
    }
    let losses = Losses {
        total,
        wasserstein: wasserstein(&fo.critic, &ro.critic),
        classification: 0.5 * (ce_fake + ce_real),
        triplet: 0.0,
        penalty,
    };
    Ok((losses, grads))
}
