use crate::error::{Error, Result};
use crate::nn::{euclidean, Matrix};

/// Hinge loss and its gradient with respect to the anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub loss: f64,
    pub grad: Matrix,
}

/// `max((1/C) Σ_c [mean_i ‖a_c − p_c,i‖ − mean_i ‖a_c − n_c,i‖] + margin, 0)`
/// over the `C` anchor rows, with Euclidean distances.
pub fn triplet_loss(anchors: &Matrix, positives: &[Matrix], negatives: &[Matrix], margin: f64) -> Result<Triplet> {
    let c = anchors.rows();
    if c == 0 {
        return Err(Error::Usage("triplet loss needs at least one anchor".into()));
    }
    if positives.len() != c || negatives.len() != c {
        return Err(Error::Usage(format!(
            "{c} anchors but {} positive and {} negative sets",
            positives.len(),
            negatives.len()
        )));
    }
    for (i, set) in positives.iter().chain(negatives).enumerate() {
        if set.rows() == 0 {
            return Err(Error::Usage(format!("empty triplet sample set {}", i % c)));
        }
        if set.cols() != anchors.cols() {
            return Err(Error::Usage("triplet sample dimension differs from anchors".into()));
        }
    }

    let mut total = 0.0;
    for (k, a) in anchors.row_iter().enumerate() {
        total += mean_distance(a, &positives[k]) - mean_distance(a, &negatives[k]);
    }
    let inner = total / c as f64 + margin;

    let mut grad = Matrix::zeros(c, anchors.cols());
    if inner > 0.0 {
        for (k, a) in anchors.row_iter().enumerate() {
            let g = grad.row_mut(k);
            accumulate_unit(g, a, &positives[k], 1.0 / c as f64);
            accumulate_unit(g, a, &negatives[k], -1.0 / c as f64);
        }
    }
    Ok(Triplet {
        loss: inner.max(0.0),
        grad,
    })
}

fn mean_distance(a: &[f64], set: &Matrix) -> f64 {
    set.row_iter().map(|p| euclidean(a, p)).sum::<f64>() / set.rows() as f64
}

/// Adds `scale · mean_i (a − s_i)/‖a − s_i‖`; coincident points contribute 0.
fn accumulate_unit(g: &mut [f64], a: &[f64], set: &Matrix, scale: f64) {
    let w = scale / set.rows() as f64;
    for s in set.row_iter() {
        let d = euclidean(a, s);
        if d > 0.0 {
            for ((gj, aj), sj) in g.iter_mut().zip(a).zip(s) {
                *gj += w * (aj - sj) / d;
            }
        }
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::Usage(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::Usage("cross-entropy over an empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::Usage(format!("label {bad} outside {} classes", logits.cols())));
    }
    let m = logits.rows() as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        grad[(r, y)] -= 1.0;
    }
    grad.scale(1.0 / m);
    Ok((loss / m, grad))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `mean critic(fake) − mean critic(real)`.
pub fn wasserstein(critic_fake: &[f64], critic_real: &[f64]) -> f64 {
    mean(critic_fake) - mean(critic_real)
}

/// Discriminator outputs on a fake batch and a real batch sharing labels.
#[derive(Debug, Clone, Copy)]
pub struct CriticPair<'a> {
    pub critic_fake: &'a [f64],
    pub critic_real: &'a [f64],
    pub logits_fake: &'a Matrix,
    pub logits_real: &'a Matrix,
    pub labels: &'a [usize],
}

impl CriticPair<'_> {
    fn classification(&self) -> Result<f64> {
        let (fake, _) = cross_entropy(self.logits_fake, self.labels)?;
        let (real, _) = cross_entropy(self.logits_real, self.labels)?;
        Ok(0.5 * (fake + real))
    }
}

/// `mean critic(x̃) − mean critic(x) + ½(CE(x̃) + CE(x)) + λ_t · triplet`.
pub fn generator_loss(d: CriticPair<'_>, triplet: f64, lambda_t: f64) -> Result<f64> {
    let triplet_term = if lambda_t == 0.0 { 0.0 } else { lambda_t * triplet };
    Ok(wasserstein(d.critic_fake, d.critic_real) + d.classification()? + triplet_term)
}

/// `mean critic(x) − mean critic(x̃) + gp_weight · GP + ½(CE(x̃) + CE(x))`.
///
/// The critic is trained to score generated features high, so the generator
/// objective above lowers it.
pub fn discriminator_loss(d: CriticPair<'_>, gradient_penalty: f64, gp_weight: f64) -> Result<f64> {
    Ok(-wasserstein(d.critic_fake, d.critic_real) + gp_weight * gradient_penalty + d.classification()?)
}
