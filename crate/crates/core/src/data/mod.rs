//! File formats, dataset assembly, splits, checkpoints and the synthetic
//! dataset generator.

mod checkpoint;
mod matrix_io;
mod split;
mod synthetic;

pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_VERSION};
pub use matrix_io::{
    load_features, parse_binary, parse_text, save_features, to_binary, to_text, write_file, LabeledMatrix, BINARY_MAGIC,
};
pub use split::{load_split, Scheme, SplitSpec};
pub use synthetic::{make_synthetic, SyntheticData, SyntheticSpec};

use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{Matrix, Rng};

/// Visual features with class labels, one semantic vector per class (row
/// `c` for class `c`) and the seen/unseen split.
#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub semantics: Matrix,
    pub class_names: Vec<String>,
    pub split: SplitSpec,
}

/// Sample indices of the training, validation and unseen test partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub unseen: Vec<usize>,
}

impl ZslDataset {
    pub fn n_classes(&self) -> usize {
        self.semantics.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_classes();
        if self.features.rows() != self.labels.len() {
            return Err(Error::Validation("features and labels differ in length".into()));
        }
        if self.class_names.len() != n {
            return Err(Error::Validation(format!(
                "{} class names for {n} semantic vectors",
                self.class_names.len()
            )));
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= n) {
            return Err(Error::Validation(format!("label {y} has no semantic vector")));
        }
        self.split.validate(n)
    }

    /// Reads features, semantic vectors (labelled by class id, each id in
    /// `0..n` exactly once) and a split. Names default to `class_<id>`.
    pub fn load(features: &Path, semantics: &Path, split: &Path, names: Option<&Path>) -> Result<Self> {
        let feats = load_features(features)?;
        let sem = load_features(semantics)?;
        let n = sem.labels.len();
        let mut order = vec![usize::MAX; n];
        for (row, &c) in sem.labels.iter().enumerate() {
            if c >= n || order[c] != usize::MAX {
                return Err(Error::Validation(format!(
                    "{}: semantic class ids must be 0..{n}, each once (saw {c})",
                    semantics.display()
                )));
            }
            order[c] = row;
        }
        let class_names = match names {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect()
            }
            None => (0..n).map(|c| format!("class_{c}")).collect(),
        };
        let split_text = std::fs::read_to_string(split).map_err(|e| Error::io(split, e))?;
        let ds = Self {
            features: feats.matrix,
            labels: feats.labels,
            semantics: sem.matrix.select_rows(&order),
            class_names,
            split: SplitSpec::parse(&split_text, split)?,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Stratified random hold-out of `validation_fraction` of each seen
    /// class (at least one sample when the class has two or more); every
    /// unseen-class sample goes to the test partition.
    pub fn partition(&self, validation_fraction: f64, rng: &mut Rng) -> Result<Partition> {
        let mut train = Vec::new();
        let mut validation = Vec::new();
        for &c in &self.split.seen {
            let mut idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect();
            if idx.is_empty() {
                return Err(Error::Validation(format!("seen class {c} has no samples")));
            }
            idx.shuffle(rng);
            let n = idx.len();
            let mut n_val = (n as f64 * validation_fraction).round() as usize;
            if n >= 2 {
                n_val = n_val.clamp(1, n - 1);
            } else {
                n_val = 0;
            }
            validation.extend_from_slice(&idx[..n_val]);
            train.extend_from_slice(&idx[n_val..]);
        }
        train.sort_unstable();
        validation.sort_unstable();
        let unseen: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.split.unseen.contains(&self.labels[i]))
            .collect();
        Ok(Partition {
            train,
            validation,
            unseen,
        })
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}
