//! Zero-shot evaluation: per-class top-1, calibrated-stacking generalized
//! accuracy, the seen/unseen accuracy curve and its area, GZSL S/U/H, and
//! retrieval precision.
//!
//! Class scores are held in a [`ScoreMatrix`] whose columns are all seen
//! classes followed by all unseen classes. Labels passed to these functions
//! are column indices into that layout.

mod retrieval;

pub use retrieval::{retrieval_precision, retrieved_count};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Per-sample class scores, seen-class columns first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    scores: Matrix,
    seen_count: usize,
}

impl ScoreMatrix {
    pub fn new(scores: Matrix, seen_count: usize) -> Result<Self> {
        if seen_count >= scores.cols() {
            return Err(Error::Usage(format!(
                "score matrix needs at least one unseen column: {seen_count} seen of {} total",
                scores.cols()
            )));
        }
        if !scores.is_finite() {
            return Err(Error::Validation("score matrix contains non-finite values".into()));
        }
        Ok(Self { scores, seen_count })
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn seen_count(&self) -> usize {
        self.seen_count
    }

    pub fn class_count(&self) -> usize {
        self.scores.cols()
    }

    pub fn samples(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_unseen_column(&self, c: usize) -> bool {
        c >= self.seen_count
    }

    /// Argmax after adding `lambda` to every unseen column; ties go to the
    /// smallest column index.
    pub fn calibrated_predictions(&self, lambda: f64) -> Vec<usize> {
        self.scores
            .row_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (c, &s) in row.iter().enumerate() {
                    let v = if c >= self.seen_count { s + lambda } else { s };
                    if v > best_score {
                        best = c;
                        best_score = v;
                    }
                }
                best
            })
            .collect()
    }
}

/// Grid of calibration offsets `lambda_min + j·step` for `j = 0..m`,
/// `m = (lambda_max − lambda_min) / step`, half-open at `lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSweep {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
}

impl Default for CalibrationSweep {
    fn default() -> Self {
        Self {
            lambda_min: -2.0,
            lambda_max: 2.0,
            step: 0.01,
        }
    }
}

impl CalibrationSweep {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.lambda_min < self.lambda_max)
            || !self.lambda_min.is_finite()
            || !self.lambda_max.is_finite()
        {
            return Err(Error::Config(format!("invalid calibration sweep {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.lambda_max - self.lambda_min) / self.step).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.lambda_min + j as f64 * self.step)
            .collect()
    }
}

/// Mean over `classes` of the fraction of that class's samples predicted
/// correctly, as a percentage.
pub fn per_class_accuracy(predictions: &[usize], labels: &[usize], classes: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::Config("per-class accuracy over an empty class set".into()));
    }
    let mut tally: BTreeMap<usize, (usize, usize)> = classes.iter().map(|&c| (c, (0, 0))).collect();
    for (&p, &y) in predictions.iter().zip(labels) {
        if let Some(t) = tally.get_mut(&y) {
            t.1 += 1;
            if p == y {
                t.0 += 1;
            }
        }
    }
    let mut sum = 0.0;
    for (c, (correct, total)) in &tally {
        if *total == 0 {
            return Err(Error::Config(format!("class {c} has no samples")));
        }
        sum += *correct as f64 / *total as f64;
    }
    Ok(100.0 * sum / tally.len() as f64)
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Per-class top-1 accuracy (percentage) with argmax over every column of
/// `scores`; ties go to the smallest column. Every column must have samples.
pub fn top1_per_class(scores: &Matrix, labels: &[usize]) -> Result<f64> {
    if scores.rows() != labels.len() {
        return Err(Error::Usage(format!(
            "{} score rows for {} labels",
            scores.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= scores.cols()) {
        return Err(Error::Usage(format!("label {bad} outside {} classes", scores.cols())));
    }
    let preds: Vec<usize> = scores.row_iter().map(argmax).collect();
    let classes: Vec<usize> = (0..scores.cols()).collect();
    per_class_accuracy(&preds, labels, &classes)
}

/// Index of the largest value, first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn check_labels(scores: &ScoreMatrix, labels: &[usize]) -> Result<()> {
    if scores.samples() != labels.len() {
        return Err(Error::Usage(format!(
            "{} score rows for {} labels",
            scores.samples(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= scores.class_count()) {
        return Err(Error::Usage(format!(
            "label {bad} outside {} classes",
            scores.class_count()
        )));
    }
    Ok(())
}

/// Generalized accuracy: the per-sample accuracy after adding each sweep
/// offset to the unseen columns, averaged over the sweep, as a percentage.
///
/// A sample counts as correct only when its true class strictly beats every
/// other calibrated score.
pub fn generalized_accuracy(scores: &ScoreMatrix, labels: &[usize], sweep: &CalibrationSweep) -> Result<f64> {
    sweep.validate()?;
    check_labels(scores, labels)?;
    if labels.is_empty() {
        return Err(Error::Config("generalized accuracy over zero samples".into()));
    }
    let lambdas = sweep.values();
    let n = labels.len() as f64;
    let mut total = 0.0;
    for &lambda in &lambdas {
        let mut correct = 0usize;
        for (row, &y) in scores.scores.row_iter().zip(labels) {
            let cal = |c: usize| {
                if scores.is_unseen_column(c) {
                    row[c] + lambda
                } else {
                    row[c]
                }
            };
            let target = cal(y);
            if (0..row.len()).all(|c| c == y || cal(c) < target) {
                correct += 1;
            }
        }
        total += correct as f64 / n;
    }
    Ok(100.0 * total / lambdas.len() as f64)
}

/// One point of the seen/unseen accuracy curve, both as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SucPoint {
    pub acc_unseen: f64,
    pub acc_seen: f64,
}

fn split_groups(scores: &ScoreMatrix, labels: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let (seen, unseen): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| !scores.is_unseen_column(labels[i]));
    if seen.is_empty() || unseen.is_empty() {
        return Err(Error::Config("the test set needs both seen and unseen samples".into()));
    }
    Ok((seen, unseen))
}

fn group_accuracy(preds: &[usize], labels: &[usize], group: &[usize]) -> Result<f64> {
    let p: Vec<usize> = group.iter().map(|&i| preds[i]).collect();
    let y: Vec<usize> = group.iter().map(|&i| labels[i]).collect();
    per_class_accuracy(&p, &y, &distinct(&y))
}

/// Seen/unseen accuracy pairs over the sweep, sorted by unseen accuracy and
/// deduplicated.
pub fn suc_curve(scores: &ScoreMatrix, labels: &[usize], sweep: &CalibrationSweep) -> Result<Vec<SucPoint>> {
    sweep.validate()?;
    check_labels(scores, labels)?;
    let (seen, unseen) = split_groups(scores, labels)?;
    let mut points = Vec::with_capacity(sweep.len());
    for lambda in sweep.values() {
        let preds = scores.calibrated_predictions(lambda);
        points.push(SucPoint {
            acc_unseen: group_accuracy(&preds, labels, &unseen)? / 100.0,
            acc_seen: group_accuracy(&preds, labels, &seen)? / 100.0,
        });
    }
    sort_points(&mut points);
    points.dedup();
    Ok(points)
}

fn sort_points(points: &mut [SucPoint]) {
    points.sort_by(|a, b| {
        a.acc_unseen
            .total_cmp(&b.acc_unseen)
            .then(b.acc_seen.total_cmp(&a.acc_seen))
    });
}

/// Trapezoidal area under the curve over the unseen-accuracy axis.
pub fn ausuc(points: &[SucPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Usage(format!(
            "AUSUC needs at least two points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    sort_points(&mut pts);
    Ok(pts
        .windows(2)
        .map(|w| (w[1].acc_unseen - w[0].acc_unseen) * (w[0].acc_seen + w[1].acc_seen) / 2.0)
        .sum())
}

/// `2SU / (S + U)`, zero when both are zero.
pub fn harmonic_mean(s: f64, u: f64) -> f64 {
    if s + u > 0.0 {
        2.0 * s * u / (s + u)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gzsl {
    pub seen: f64,
    pub unseen: f64,
    pub harmonic: f64,
}

/// Uncalibrated GZSL accuracies over the joint seen+unseen search space.
pub fn gzsl_suh(scores: &ScoreMatrix, labels: &[usize]) -> Result<Gzsl> {
    check_labels(scores, labels)?;
    let (seen, unseen) = split_groups(scores, labels)?;
    let preds = scores.calibrated_predictions(0.0);
    let s = group_accuracy(&preds, labels, &seen)?;
    let u = group_accuracy(&preds, labels, &unseen)?;
    Ok(Gzsl {
        seen: s,
        unseen: u,
        harmonic: harmonic_mean(s, u),
    })
}

/// Everything `evaluate` reports. Percentages except `ausuc` and the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1_unseen: f64,
    pub seen: f64,
    pub unseen: f64,
    pub harmonic: f64,
    pub generalized_accuracy: f64,
    pub ausuc: f64,
    pub map_at: BTreeMap<String, f64>,
    pub suc_points: Vec<SucPoint>,
}

impl EvalReport {
    pub fn check_ranges(&self) -> Result<()> {
        let pct = [
            self.top1_unseen,
            self.seen,
            self.unseen,
            self.harmonic,
            self.generalized_accuracy,
        ];
        let ok = pct
            .iter()
            .chain(self.map_at.values())
            .all(|v| (0.0..=100.0).contains(v))
            && (0.0..=1.0).contains(&self.ausuc)
            && self
                .suc_points
                .iter()
                .all(|p| (0.0..=1.0).contains(&p.acc_seen) && (0.0..=1.0).contains(&p.acc_unseen));
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("evaluation report value out of range".into()))
        }
    }

    /// Two tab-separated columns, `acc_unseen acc_seen`, with a header.
    pub fn suc_tsv(&self) -> String {
        let mut out = String::from("acc_unseen\tacc_seen\n");
        for p in &self.suc_points {
            out.push_str(&format!("{}\t{}\n", p.acc_unseen, p.acc_seen));
        }
        out
    }
}
