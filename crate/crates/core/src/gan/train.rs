use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::objective::{discriminator_objective, generator_objective, DiscriminatorBatch, GeneratorBatch, Losses};
use super::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, MinMaxScaler, NoiseMode};
use crate::error::{Error, Result};
use crate::metrics::{generalized_accuracy, CalibrationSweep, ScoreMatrix};
use crate::nn::{derived_rng, AdamConfig, AdamState, Matrix, Rng, DEFAULT_LEAKY_SLOPE};
use crate::ssl::KnnClassifier;

const STREAM_TRAIN: u64 = 1;
const STREAM_PROBE: u64 = 2;

/// Architecture and optimisation settings for the feature GAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanTrainConfig {
    pub margin: f64,
    pub lambda_t: f64,
    pub n_d: usize,
    pub n_step: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub adam: AdamConfig,
    pub gp_weight: f64,
    pub eval_every: usize,
    pub probe_k: usize,
    pub probe_per_class: usize,
    pub validation_fraction: f64,
    pub reduce_dim: usize,
    pub gen_hidden_dim: usize,
    pub disc_hidden_dim: usize,
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub leaky_slope: f64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.1,
            lambda_t: 1.0,
            n_d: 5,
            n_step: 10_000,
            patience: 100,
            batch_size: 1000,
            n_pos: 5,
            n_neg: 5,
            adam: AdamConfig::gan_default(),
            gp_weight: 10.0,
            eval_every: 40,
            probe_k: 20,
            probe_per_class: 60,
            validation_fraction: 0.1,
            reduce_dim: 1000,
            gen_hidden_dim: 2048,
            disc_hidden_dim: 2048,
            noise_sigma: 1.0,
            noise_mode: NoiseMode::Additive,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("gan.margin must be >= 0");
        }
        if !self.lambda_t.is_finite() || !self.gp_weight.is_finite() || self.gp_weight < 0.0 {
            return bad("gan.lambda_t and gan.gp_weight must be finite, gp_weight >= 0");
        }
        if self.n_d == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("gan.n_d, gan.batch_size and gan.eval_every must be at least 1");
        }
        if self.n_pos == 0 || self.n_neg == 0 || self.probe_k == 0 || self.probe_per_class == 0 {
            return bad("gan.n_pos, gan.n_neg, gan.probe_k and gan.probe_per_class must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("gan.validation_fraction must lie in (0, 1)");
        }
        self.adam.validate()
    }

    pub fn generator_config(&self, semantic_dim: usize, visual_dim: usize) -> GeneratorConfig {
        GeneratorConfig {
            semantic_dim,
            reduce_dim: self.reduce_dim,
            noise_dim: self.reduce_dim,
            hidden_dim: self.gen_hidden_dim,
            visual_dim,
            noise_sigma: self.noise_sigma,
            noise_mode: self.noise_mode,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn discriminator_config(&self, visual_dim: usize, num_classes: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            visual_dim,
            hidden_dim: self.disc_hidden_dim,
            num_classes,
        }
    }
}

/// A trained or training feature GAN together with the feature scaling it
/// expects and the class served by each row of the discriminator's class head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub scaler: MinMaxScaler,
    pub head_classes: Vec<usize>,
}

impl GanModel {
    pub fn new(
        cfg: &GanTrainConfig,
        semantic_dim: usize,
        scaler: MinMaxScaler,
        head_classes: Vec<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let visual_dim = scaler.dim();
        let generator = Generator::new(cfg.generator_config(semantic_dim, visual_dim), rng)?;
        let discriminator = Discriminator::new(&cfg.discriminator_config(visual_dim, head_classes.len()), rng)?;
        let model = Self {
            generator,
            discriminator,
            scaler,
            head_classes,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.generator.config();
        let d = self.discriminator.config();
        if g.visual_dim != d.visual_dim || g.visual_dim != self.scaler.dim() {
            return Err(Error::Validation(format!(
                "generator, discriminator and scaler disagree on feature dimension ({}, {}, {})",
                g.visual_dim,
                d.visual_dim,
                self.scaler.dim()
            )));
        }
        if d.num_classes != self.head_classes.len() {
            return Err(Error::Validation(format!(
                "class head has {} rows for {} classes",
                d.num_classes,
                self.head_classes.len()
            )));
        }
        let mut ids = self.head_classes.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.head_classes.len() {
            return Err(Error::Validation("duplicate class in the class head".into()));
        }
        if !(self.generator.is_finite() && self.discriminator.is_finite()) {
            return Err(Error::Validation("model parameters are not finite".into()));
        }
        Ok(())
    }

    /// Adds head rows for classes not yet served, in the given order.
    pub fn register_classes(&mut self, classes: &[usize], rng: &mut Rng) -> Result<usize> {
        let before = self.head_classes.len();
        for &c in classes {
            if !self.head_classes.contains(&c) {
                self.head_classes.push(c);
            }
        }
        self.discriminator.expand_classes(self.head_classes.len(), rng)?;
        Ok(self.head_classes.len() - before)
    }
}

/// Training samples in scaled feature space. Semantic rows are indexed by
/// class id.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub semantics: &'a Matrix,
}

/// Held-out real seen-class features used to pick the best checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct ValidationProbe<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub seen: &'a [usize],
    pub unseen: &'a [usize],
}

impl ValidationProbe<'_> {
    /// Generalized accuracy of a kNN fitted on generated features of every
    /// class, queried with the held-out features.
    pub fn score(&self, gen: &Generator, semantics: &Matrix, per_class: usize, k: usize, rng: &mut Rng) -> Result<f64> {
        let classes: Vec<usize> = self.seen.iter().chain(self.unseen).copied().collect();
        let (synth, labels) = gen.synthesize(semantics, &classes, per_class, rng)?;
        let knn = KnnClassifier::new(synth, labels, k)?;
        let scores = knn.vote_scores(self.features, &classes)?;
        let columns = self
            .labels
            .iter()
            .map(|y| {
                self.seen
                    .iter()
                    .position(|c| c == y)
                    .ok_or_else(|| Error::Validation(format!("validation label {y} is not a seen class")))
            })
            .collect::<Result<Vec<_>>>()?;
        let sm = ScoreMatrix::new(scores, self.seen.len())?;
        generalized_accuracy(&sm, &columns, &CalibrationSweep::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub triplet: f64,
    pub val_gacc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<TrainLogEntry>,
    pub best_step: Option<usize>,
}

impl TrainLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\td_loss\tg_loss\ttriplet\tval_gacc\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.step, e.d_loss, e.g_loss, e.triplet, e.val_gacc
            );
        }
        out
    }
}

struct Sampler<'a> {
    labels: &'a [usize],
    by_class: BTreeMap<usize, Vec<usize>>,
}

impl<'a> Sampler<'a> {
    fn new(labels: &'a [usize]) -> Result<Self> {
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &y) in labels.iter().enumerate() {
            by_class.entry(y).or_default().push(i);
        }
        if by_class.len() < 2 {
            return Err(Error::Config(
                "training needs at least two classes for triplet negatives".into(),
            ));
        }
        Ok(Self { labels, by_class })
    }

    fn batch(&self, m: usize, rng: &mut Rng) -> Vec<usize> {
        (0..m).map(|_| rng.random_range(0..self.labels.len())).collect()
    }

    /// Without replacement when the class is large enough, else with.
    fn positives(&self, class: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
        let pool = &self.by_class[&class];
        if pool.len() >= n {
            index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect()
        } else {
            (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
        }
    }

    fn negatives(&self, class: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
        let available = self.labels.len() - self.by_class[&class].len();
        let distinct = available >= n;
        let mut out: Vec<usize> = Vec::with_capacity(n);
        while out.len() < n {
            let i = rng.random_range(0..self.labels.len());
            if self.labels[i] != class && !(distinct && out.contains(&i)) {
                out.push(i);
            }
        }
        out
    }
}

/// Adversarial training with triplet regularisation, periodic validation and
/// early stopping. Returns the checkpoint with the best validation score
/// (the final parameters if no evaluation ran) and the training log.
pub fn train_gan(
    mut model: GanModel,
    data: TrainingData<'_>,
    probe: ValidationProbe<'_>,
    cfg: &GanTrainConfig,
    seed: u64,
) -> Result<(GanModel, TrainLog)> {
    cfg.validate()?;
    model.validate()?;
    let mut log = TrainLog::default();
    if cfg.n_step == 0 {
        return Ok((model, log));
    }
    if data.features.rows() != data.labels.len() || data.features.rows() == 0 {
        return Err(Error::Config(
            "training features and labels are empty or misaligned".into(),
        ));
    }
    if data.features.cols() != model.scaler.dim() {
        return Err(Error::Config(format!(
            "training features have {} dims, model expects {}",
            data.features.cols(),
            model.scaler.dim()
        )));
    }
    let head: BTreeMap<usize, usize> = model.head_classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let head_labels = data
        .labels
        .iter()
        .map(|y| {
            head.get(y)
                .copied()
                .ok_or_else(|| Error::Config(format!("training class {y} has no class-head row")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(&y) = data.labels.iter().find(|&&y| y >= data.semantics.rows()) {
        return Err(Error::Config(format!("training class {y} has no semantic vector")));
    }
    // relu swallows NaN, so bad inputs would otherwise train silently
    if !data
        .features
        .as_slice()
        .iter()
        .chain(data.semantics.as_slice())
        .all(|v| v.is_finite())
    {
        return Err(Error::Validation(
            "training features or semantics contain NaN or infinity".into(),
        ));
    }
    let sampler = Sampler::new(data.labels)?;

    let mut rng = derived_rng(seed, STREAM_TRAIN);
    let mut probe_rng = derived_rng(seed, STREAM_PROBE);
    let mut g_opt = AdamState::new(cfg.adam, &model.generator);
    let mut d_opt = AdamState::new(cfg.adam, &model.discriminator);
    let m = cfg.batch_size;
    let mut best: Option<(f64, GanModel)> = None;
    let mut stale = 0usize;
    let mut last_d = Losses::default();

    let non_finite = |step: usize, what: &str| Error::NonFinite {
        step,
        quantity: what.to_owned(),
    };

    for step in 1..=cfg.n_step {
        for _ in 0..cfg.n_d {
            let idx = sampler.batch(m, &mut rng);
            let classes: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let noise = model.generator.sample_noise(m, &mut rng);
            let fake = model
                .generator
                .generate(&data.semantics.select_rows(&classes), &noise)?;
            let epsilon: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let batch = DiscriminatorBatch {
                real: data.features.select_rows(&idx),
                fake,
                labels: idx.iter().map(|&i| head_labels[i]).collect(),
                epsilon,
            };
            let (losses, grads) = discriminator_objective(&model.discriminator, &batch, cfg.gp_weight)?;
            if !losses.is_finite() {
                return Err(non_finite(step, "discriminator loss"));
            }
            d_opt.step(&mut model.discriminator, &grads)?;
            last_d = losses;
        }

        let idx = sampler.batch(m, &mut rng);
        let classes: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
        let noise = model.generator.sample_noise(m, &mut rng);
        let mut positives = Vec::with_capacity(m);
        let mut negatives = Vec::with_capacity(m);
        for &c in &classes {
            positives.push(data.features.select_rows(&sampler.positives(c, cfg.n_pos, &mut rng)));
            negatives.push(data.features.select_rows(&sampler.negatives(c, cfg.n_neg, &mut rng)));
        }
        let batch = GeneratorBatch {
            semantics: data.semantics.select_rows(&classes),
            noise,
            real: data.features.select_rows(&idx),
            labels: idx.iter().map(|&i| head_labels[i]).collect(),
            positives,
            negatives,
        };
        let (g_losses, grads) =
            generator_objective(&model.generator, &model.discriminator, &batch, cfg.margin, cfg.lambda_t)?;
        if !g_losses.is_finite() {
            return Err(non_finite(step, "generator loss"));
        }
        g_opt.step(&mut model.generator, &grads)?;
        if !(model.generator.is_finite() && model.discriminator.is_finite()) {
            return Err(non_finite(step, "parameters"));
        }

        if step % cfg.eval_every == 0 || step == cfg.n_step {
            let gacc = probe.score(
                &model.generator,
                data.semantics,
                cfg.probe_per_class,
                cfg.probe_k,
                &mut probe_rng,
            )?;
            log.entries.push(TrainLogEntry {
                step,
                d_loss: last_d.total,
                g_loss: g_losses.total,
                triplet: g_losses.triplet,
                val_gacc: gacc,
            });
            log::debug!(
                "step {step}: d_loss {:.4} g_loss {:.4} triplet {:.4} val_gacc {gacc:.2}",
                last_d.total,
                g_losses.total,
                g_losses.triplet
            );
            if best.as_ref().is_none_or(|(b, _)| gacc > *b) {
                best = Some((gacc, model.clone()));
                log.best_step = Some(step);
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    log::debug!("early stop at step {step}");
                    break;
                }
            }
        }
    }
    Ok((best.map(|(_, m)| m).unwrap_or(model), log))
}
