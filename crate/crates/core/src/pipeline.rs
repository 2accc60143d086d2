//! End-to-end orchestration: partition and scale a dataset, train with
//! semi-supervised rounds, and evaluate a trained model.

use std::collections::BTreeMap;

use crate::cko::{overlay, similarity_matrix, ClassRecord, EmbeddingTable, Similarity, SimilarityMatrix};
use crate::config::FitOn;
use crate::data::{SyntheticData, ZslDataset};
use crate::error::{Error, Result};
use crate::gan::{
    Discriminator, DiscriminatorConfig, GanModel, GanTrainConfig, Generator, GeneratorConfig, MinMaxScaler, NoiseMode,
    ValidationProbe,
};
use crate::metrics::{
    ausuc, generalized_accuracy, gzsl_suh, retrieval_precision, suc_curve, top1_per_class, EvalReport, ScoreMatrix,
};
use crate::nn::{derived_rng, Activation, Dense, Matrix};
use crate::ssl::{run_ssl, KnnClassifier, SslConfig, SslOutcome, TrainingSet, UnseenPool};
use crate::text::{preprocess, StopWords, TfIdfModel};

const STREAM_SPLIT: u64 = 5;
const STREAM_INIT: u64 = 6;
const STREAM_EVAL: u64 = 7;

/// Scaled features of the three partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: Matrix,
    pub train_labels: Vec<usize>,
    pub validation: Matrix,
    pub validation_labels: Vec<usize>,
    pub unseen: Matrix,
    pub unseen_labels: Vec<usize>,
}

/// Splits `ds` with the seed's partition stream and applies `scaler`, or a
/// scaler fitted on the training partition when none is given.
pub fn prepare(
    ds: &ZslDataset,
    validation_fraction: f64,
    scaler: Option<&MinMaxScaler>,
    seed: u64,
) -> Result<(Prepared, MinMaxScaler)> {
    ds.validate()?;
    let part = ds.partition(validation_fraction, &mut derived_rng(seed, STREAM_SPLIT))?;
    let train_raw = ds.features.select_rows(&part.train);
    let scaler = match scaler {
        Some(s) => s.clone(),
        None => MinMaxScaler::fit(&train_raw)?,
    };
    if scaler.dim() != ds.features.cols() {
        return Err(Error::Validation(format!(
            "model expects {}-dimensional features, data has {}",
            scaler.dim(),
            ds.features.cols()
        )));
    }
    let prepared = Prepared {
        train: scaler.transform(&train_raw)?,
        train_labels: ds.labels_at(&part.train),
        validation: scaler.transform(&ds.features.select_rows(&part.validation))?,
        validation_labels: ds.labels_at(&part.validation),
        unseen: scaler.transform(&ds.features.select_rows(&part.unseen))?,
        unseen_labels: ds.labels_at(&part.unseen),
    };
    Ok((prepared, scaler))
}

/// Initialises a model over the seen classes and runs the semi-supervised
/// training loop.
pub fn train(ds: &ZslDataset, gan: &GanTrainConfig, ssl: &SslConfig, seed: u64) -> Result<SslOutcome> {
    gan.validate()?;
    ssl.validate()?;
    let (data, scaler) = prepare(ds, gan.validation_fraction, None, seed)?;
    let model = GanModel::new(
        gan,
        ds.semantics.cols(),
        scaler,
        ds.split.seen.clone(),
        &mut derived_rng(seed, STREAM_INIT),
    )?;
    let probe = ValidationProbe {
        features: &data.validation,
        labels: &data.validation_labels,
        seen: &ds.split.seen,
        unseen: &ds.split.unseen,
    };
    let pool = UnseenPool {
        features: &data.unseen,
        labels: &data.unseen_labels,
        classes: &ds.split.unseen,
    };
    let training_set = TrainingSet::new(data.train, data.train_labels)?;
    run_ssl(model, training_set, &ds.semantics, probe, pool, gan, ssl, seed)
}

/// Class similarities, overlaid articles and one TF-IDF vector per class.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeOutput {
    pub similarity: SimilarityMatrix,
    pub records: Vec<ClassRecord>,
    /// Row `i` belongs to `records[i]`.
    pub semantics: Matrix,
}

/// Ranks classes by name similarity, overlays the `k` nearest articles
/// onto each class, and encodes the overlaid articles with TF-IDF fitted on
/// either the overlaid or the original articles.
pub fn class_knowledge(
    mut records: Vec<ClassRecord>,
    table: &EmbeddingTable,
    stopwords: &StopWords,
    k: usize,
    similarity: Similarity,
    fit_on: FitOn,
) -> Result<KnowledgeOutput> {
    let names: Vec<&str> = records.iter().map(|r| r.name.as_str()).collect();
    let sm = similarity_matrix(table, &names, similarity)?;
    overlay(&mut records, &sm, k)?;
    let docs: Vec<_> = records.iter().map(|r| preprocess(&r.overlay, stopwords)).collect();
    let model = match fit_on {
        FitOn::Overlay => TfIdfModel::fit(&docs)?,
        FitOn::Original => {
            let originals: Vec<_> = records.iter().map(|r| preprocess(&r.article, stopwords)).collect();
            TfIdfModel::fit(&originals)?
        }
    };
    let rows: Vec<Vec<f64>> = docs.iter().map(|d| model.transform(d).into_vec()).collect();
    if model.dim() == 0 {
        return Err(Error::Validation("articles contain no indexable terms".into()));
    }
    let semantics = Matrix::from_rows(&rows)?;
    Ok(KnowledgeOutput {
        similarity: sm,
        records,
        semantics,
    })
}

/// Settings for [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub sweep: crate::metrics::CalibrationSweep,
    pub retrieval_ratios: Vec<f64>,
    pub k: usize,
    pub per_class_synthetic: usize,
    pub validation_fraction: f64,
}

/// Generated reference features for the seen classes followed by the unseen
/// classes.
fn reference_set(gen: &Generator, ds: &ZslDataset, per_class: usize, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    let classes: Vec<usize> = ds.split.seen.iter().chain(&ds.split.unseen).copied().collect();
    gen.synthesize(&ds.semantics, &classes, per_class, &mut derived_rng(seed, STREAM_EVAL))
}

fn columns(labels: &[usize], classes: &[usize]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|y| {
            classes
                .iter()
                .position(|c| c == y)
                .ok_or_else(|| Error::Validation(format!("label {y} is not in the evaluated class set")))
        })
        .collect()
}

fn ratio_key(ratio: f64) -> String {
    format!("{}", (ratio * 100.0).round() as i64)
}

/// Scores a model on the held-out seen samples and every unseen sample.
///
/// Unseen top-1 ranks unseen classes only. The GZSL figures and the
/// calibration curve use the joint search space over the held-out seen
/// partition plus the unseen samples.
pub fn evaluate(model: &GanModel, ds: &ZslDataset, settings: &EvalSettings, seed: u64) -> Result<EvalReport> {
    model.validate()?;
    settings.sweep.validate()?;
    let gcfg = model.generator.config();
    if gcfg.semantic_dim != ds.semantics.cols() {
        return Err(Error::Validation(format!(
            "model expects {}-dimensional semantics, data has {}",
            gcfg.semantic_dim,
            ds.semantics.cols()
        )));
    }
    let (data, _) = prepare(ds, settings.validation_fraction, Some(&model.scaler), seed)?;
    let (refs, ref_labels) = reference_set(&model.generator, ds, settings.per_class_synthetic, seed)?;
    let unseen_rows: Vec<usize> = (0..ref_labels.len())
        .filter(|&i| ds.split.unseen.contains(&ref_labels[i]))
        .collect();
    let unseen_refs = refs.select_rows(&unseen_rows);
    let unseen_ref_labels: Vec<usize> = unseen_rows.iter().map(|&i| ref_labels[i]).collect();

    let zsl = KnnClassifier::new(unseen_refs.clone(), unseen_ref_labels.clone(), settings.k)?;
    let zsl_scores = zsl.vote_scores(&data.unseen, &ds.split.unseen)?;
    let top1_unseen = top1_per_class(&zsl_scores, &columns(&data.unseen_labels, &ds.split.unseen)?)?;

    let all: Vec<usize> = ds.split.seen.iter().chain(&ds.split.unseen).copied().collect();
    let joint = KnnClassifier::new(refs, ref_labels, settings.k)?;
    let test = data.validation.vstack(&data.unseen)?;
    let test_labels: Vec<usize> = data
        .validation_labels
        .iter()
        .chain(&data.unseen_labels)
        .copied()
        .collect();
    let cols = columns(&test_labels, &all)?;
    let scores = ScoreMatrix::new(joint.vote_scores(&test, &all)?, ds.split.seen.len())?;
    let gzsl = gzsl_suh(&scores, &cols)?;
    let g_acc = generalized_accuracy(&scores, &cols, &settings.sweep)?;
    let suc_points = suc_curve(&scores, &cols, &settings.sweep)?;
    let area = ausuc(&suc_points)?;

    let map_at = retrieval(&unseen_refs, &unseen_ref_labels, &ds.split.unseen, &data, settings)?;
    let report = EvalReport {
        top1_unseen,
        seen: gzsl.seen,
        unseen: gzsl.unseen,
        harmonic: gzsl.harmonic,
        generalized_accuracy: g_acc,
        ausuc: area,
        map_at,
        suc_points,
    };
    report.check_ranges()?;
    Ok(report)
}

fn centroids(refs: &Matrix, labels: &[usize], classes: &[usize]) -> Result<Matrix> {
    let mut out = Matrix::zeros(classes.len(), refs.cols());
    for (r, c) in classes.iter().enumerate() {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == *c).collect();
        if rows.is_empty() {
            return Err(Error::Usage(format!("no generated features for class {c}")));
        }
        out.row_mut(r).copy_from_slice(&refs.select_rows(&rows).column_means());
    }
    Ok(out)
}

fn retrieval(
    unseen_refs: &Matrix,
    unseen_ref_labels: &[usize],
    unseen: &[usize],
    data: &Prepared,
    settings: &EvalSettings,
) -> Result<BTreeMap<String, f64>> {
    let queries = centroids(unseen_refs, unseen_ref_labels, unseen)?;
    settings
        .retrieval_ratios
        .iter()
        .map(|&r| {
            let p = retrieval_precision(&queries, unseen, &data.unseen, &data.unseen_labels, r)?;
            Ok((ratio_key(r), p))
        })
        .collect()
}

/// Retrieval precision for each ratio, keyed by the ratio as a percentage.
pub fn retrieve(
    model: &GanModel,
    ds: &ZslDataset,
    settings: &EvalSettings,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    model.validate()?;
    let (data, _) = prepare(ds, settings.validation_fraction, Some(&model.scaler), seed)?;
    let (refs, labels) = reference_set(&model.generator, ds, settings.per_class_synthetic, seed)?;
    let rows: Vec<usize> = (0..labels.len())
        .filter(|&i| ds.split.unseen.contains(&labels[i]))
        .collect();
    let unseen_labels: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
    retrieval(
        &refs.select_rows(&rows),
        &unseen_labels,
        &ds.split.unseen,
        &data,
        settings,
    )
}

/// A model whose generator reproduces the synthetic class centers exactly:
/// noise-free, reduction by the hidden map, and a leaky layer pair that
/// composes to the identity before the final tanh. Features are unscaled.
pub fn oracle_model(synthetic: &SyntheticData, disc_hidden_dim: usize, seed: u64) -> Result<GanModel> {
    let slope = 0.2;
    let (visual, semantic) = synthetic.map.shape();
    let config = GeneratorConfig {
        semantic_dim: semantic,
        reduce_dim: visual,
        noise_dim: visual,
        hidden_dim: 2 * visual,
        visual_dim: visual,
        noise_sigma: 0.0,
        noise_mode: NoiseMode::Additive,
        leaky_slope: slope,
    };
    let reduce = Dense::new(synthetic.map.clone(), vec![0.0; visual], Activation::Identity)?;
    let mut split = Matrix::zeros(2 * visual, visual);
    let mut merge = Matrix::zeros(visual, 2 * visual);
    for j in 0..visual {
        split[(j, j)] = 1.0;
        split[(visual + j, j)] = -1.0;
        merge[(j, j)] = 1.0 / (1.0 + slope);
        merge[(j, visual + j)] = -1.0 / (1.0 + slope);
    }
    let hidden = Dense::new(split, vec![0.0; 2 * visual], Activation::LeakyRelu { slope })?;
    let out = Dense::new(merge, vec![0.0; visual], Activation::Tanh)?;
    let generator = Generator::from_layers(config, reduce, [hidden, out])?;
    let seen = synthetic.dataset.split.seen.clone();
    let discriminator = Discriminator::new(
        &DiscriminatorConfig {
            visual_dim: visual,
            hidden_dim: disc_hidden_dim,
            num_classes: seen.len(),
        },
        &mut derived_rng(seed, STREAM_INIT),
    )?;
    let model = GanModel {
        generator,
        discriminator,
        scaler: MinMaxScaler::identity(visual),
        head_classes: seen,
    };
    model.validate()?;
    Ok(model)
}
