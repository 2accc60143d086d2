//! Semi-supervised retraining: label confident unseen-class samples with a
//! kNN fitted on generated features, add them to the training set, widen the
//! discriminator's class head and train again.

mod knn;

pub use knn::KnnClassifier;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{train_gan, GanModel, GanTrainConfig, Generator, TrainLog, TrainingData, ValidationProbe};
use crate::metrics::per_class_accuracy;
use crate::nn::{derived_rng, Matrix, Rng};

const STREAM_PSEUDO: u64 = 3;
const STREAM_HEAD: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SslConfig {
    pub psi: f64,
    pub n_ssl: usize,
    pub per_class_synthetic: usize,
    pub k: usize,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            psi: 0.5,
            n_ssl: 2,
            per_class_synthetic: 60,
            k: 20,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        // values above 1 are allowed and retain nothing
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return Err(Error::Config(format!("ssl.psi {} must be >= 0", self.psi)));
        }
        if self.n_ssl == 0 || self.per_class_synthetic == 0 || self.k == 0 {
            return Err(Error::Config(
                "ssl.n_ssl, ssl.per_class_synthetic and ssl.k must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Real unseen-class samples with predicted labels at or above the
/// confidence threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
    /// Row of each retained sample in the queried matrix.
    pub source_rows: Vec<usize>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Unlabelled-at-training-time features of unseen classes. `labels` are the
/// true classes, used only for reporting.
#[derive(Debug, Clone, Copy)]
pub struct UnseenPool<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub classes: &'a [usize],
}

/// kNN predictions of every unseen sample, before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
}

impl Predictions {
    /// Keeps predictions with confidence at least `psi`.
    pub fn threshold(&self, features: &Matrix, psi: f64) -> PseudoLabelSet {
        let keep: Vec<usize> = (0..self.labels.len()).filter(|&i| self.confidences[i] >= psi).collect();
        PseudoLabelSet {
            samples: features.select_rows(&keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            confidences: keep.iter().map(|&i| self.confidences[i]).collect(),
            source_rows: keep,
        }
    }
}

/// Fits a kNN on `per_class_synthetic` generated features per unseen class
/// and predicts every row of `features`.
pub fn predict_unseen(
    gen: &Generator,
    semantics: &Matrix,
    classes: &[usize],
    features: &Matrix,
    cfg: &SslConfig,
    rng: &mut Rng,
) -> Result<Predictions> {
    let (synth, labels) = gen.synthesize(semantics, classes, cfg.per_class_synthetic, rng)?;
    let knn = KnnClassifier::new(synth, labels, cfg.k)?;
    let (labels, confidences) = knn.predict_proba(features)?.into_iter().unzip();
    Ok(Predictions { labels, confidences })
}

pub fn pseudo_label(
    gen: &Generator,
    semantics: &Matrix,
    classes: &[usize],
    features: &Matrix,
    cfg: &SslConfig,
    rng: &mut Rng,
) -> Result<PseudoLabelSet> {
    Ok(predict_unseen(gen, semantics, classes, features, cfg, rng)?.threshold(features, cfg.psi))
}

/// Training features in scaled space with a flag marking pseudo-labelled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub pseudo: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Augmentation {
    pub added: usize,
    pub new_classes: Vec<usize>,
}

fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

impl TrainingSet {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Usage("training features and labels differ in length".into()));
        }
        let pseudo = vec![false; labels.len()];
        Ok(Self {
            features,
            labels,
            pseudo,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn data<'a>(&'a self, semantics: &'a Matrix) -> TrainingData<'a> {
        TrainingData {
            features: &self.features,
            labels: &self.labels,
            semantics,
        }
    }

    /// Appends pseudo-labelled rows not already present (bit-for-bit), so a
    /// sample keeps the label it was first given.
    pub fn augment(&mut self, pl: &PseudoLabelSet) -> Result<Augmentation> {
        if !pl.is_empty() && pl.samples.cols() != self.features.cols() {
            return Err(Error::Usage(format!(
                "pseudo-labelled samples have {} dims, training set has {}",
                pl.samples.cols(),
                self.features.cols()
            )));
        }
        let mut present: HashSet<Vec<u64>> = self.features.row_iter().map(row_key).collect();
        let known: HashSet<usize> = self.labels.iter().copied().collect();
        let mut out = Augmentation::default();
        for (row, &label) in pl.samples.row_iter().zip(&pl.labels) {
            if present.insert(row_key(row)) {
                self.features.push_row(row)?;
                self.labels.push(label);
                self.pseudo.push(true);
                out.added += 1;
                if !known.contains(&label) && !out.new_classes.contains(&label) {
                    out.new_classes.push(label);
                }
            }
        }
        out.new_classes.sort_unstable();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub retained: usize,
    pub added: usize,
    pub new_classes: usize,
    pub train_size: usize,
    pub unseen_top1: f64,
    pub val_gacc: f64,
}

impl IterationReport {
    pub fn tsv(reports: &[IterationReport]) -> String {
        let mut out = String::from("iteration\tretained\tadded\tnew_classes\ttrain_size\tunseen_top1\tval_gacc\n");
        for r in reports {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.iteration, r.retained, r.added, r.new_classes, r.train_size, r.unseen_top1, r.val_gacc
            ));
        }
        out
    }
}

pub struct SslOutcome {
    pub model: GanModel,
    pub training_set: TrainingSet,
    pub logs: Vec<TrainLog>,
    pub reports: Vec<IterationReport>,
}

/// Seed for SSL iteration `i`; iteration 0 uses the base seed unchanged.
pub fn iteration_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Up to `n_ssl` rounds of training, pseudo-labelling and augmentation.
/// Stops early once a round adds nothing, since the next round would retrain
/// on an unchanged set. The final round's pseudo labels are only reported.
#[allow(clippy::too_many_arguments)]
pub fn run_ssl(
    mut model: GanModel,
    mut training_set: TrainingSet,
    semantics: &Matrix,
    probe: ValidationProbe<'_>,
    unseen: UnseenPool<'_>,
    gan: &GanTrainConfig,
    cfg: &SslConfig,
    seed: u64,
) -> Result<SslOutcome> {
    cfg.validate()?;
    if unseen.features.rows() != unseen.labels.len() {
        return Err(Error::Usage("unseen features and labels differ in length".into()));
    }
    let mut logs = Vec::new();
    let mut reports = Vec::new();
    for i in 0..cfg.n_ssl {
        let s = iteration_seed(seed, i);
        let (trained, log) = train_gan(model, training_set.data(semantics), probe, gan, s)?;
        model = trained;
        let val_gacc = log
            .best_step
            .and_then(|b| log.entries.iter().find(|e| e.step == b))
            .map_or(0.0, |e| e.val_gacc);
        logs.push(log);

        let mut rng = derived_rng(s, STREAM_PSEUDO);
        let preds = predict_unseen(
            &model.generator,
            semantics,
            unseen.classes,
            unseen.features,
            cfg,
            &mut rng,
        )?;
        let unseen_top1 = if unseen.labels.is_empty() {
            0.0
        } else {
            per_class_accuracy(&preds.labels, unseen.labels, &distinct(unseen.labels))?
        };
        let pl = preds.threshold(unseen.features, cfg.psi);
        let last = i + 1 == cfg.n_ssl;
        let aug = if last {
            Augmentation::default()
        } else {
            training_set.augment(&pl)?
        };
        let new_classes = if aug.new_classes.is_empty() {
            0
        } else {
            model.register_classes(&aug.new_classes, &mut derived_rng(s, STREAM_HEAD))?
        };
        reports.push(IterationReport {
            iteration: i + 1,
            retained: pl.len(),
            added: aug.added,
            new_classes,
            train_size: training_set.len(),
            unseen_top1,
            val_gacc,
        });
        let r = &reports[reports.len() - 1];
        log::info!(
            "ssl round {}: unseen top-1 {:.2}, retained {}, added {}, training set {}",
            r.iteration,
            r.unseen_top1,
            r.retained,
            r.added,
            r.train_size
        );
        if aug.added == 0 {
            break;
        }
    }
    Ok(SslOutcome {
        model,
        training_set,
        logs,
        reports,
    })
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}
