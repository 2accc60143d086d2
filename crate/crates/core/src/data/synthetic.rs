use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{SplitSpec, ZslDataset};
use crate::error::{Error, Result};
use crate::nn::{gaussian_matrix, l2_norm, seeded_rng, Matrix};

/// Parameters of a dataset whose classes are noisy clusters around
/// `tanh(W* s_c)` for a hidden linear map `W*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_seen: usize,
    pub num_unseen: usize,
    pub samples_per_class: usize,
    pub semantic_dim: usize,
    pub visual_dim: usize,
    /// Standard deviation of the per-sample noise around each center.
    pub sigma: f64,
    /// Standard deviation of the entries of `W*`.
    pub map_scale: f64,
    /// Fraction of nonzero semantic entries.
    pub density: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_seen: 10,
            num_unseen: 5,
            samples_per_class: 60,
            semantic_dim: 50,
            visual_dim: 64,
            sigma: 0.1,
            map_scale: 1.0,
            density: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.num_seen,
            self.num_unseen,
            self.samples_per_class,
            self.semantic_dim,
            self.visual_dim,
        ];
        if counts.contains(&0) {
            return Err(Error::Config("synthetic counts and dims must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !(self.map_scale >= 0.0 && self.map_scale.is_finite()) {
            return Err(Error::Config("synthetic sigma and map_scale must be >= 0".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config("synthetic density must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A generated dataset and the ground truth behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: ZslDataset,
    /// `W*`, `visual_dim × semantic_dim`.
    pub map: Matrix,
    /// Row `c` is the center of class `c`.
    pub centers: Matrix,
}

/// Classes `0..num_seen` are seen, the rest unseen. Samples are grouped by
/// class in id order.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let n = spec.num_seen + spec.num_unseen;
    let nnz = ((spec.semantic_dim as f64 * spec.density).round() as usize).clamp(1, spec.semantic_dim);

    let mut semantics = Matrix::zeros(n, spec.semantic_dim);
    for c in 0..n {
        let row = semantics.row_mut(c);
        for j in index::sample(&mut rng, spec.semantic_dim, nnz) {
            // strictly positive so the norm never vanishes
            row[j] = 1.0 - rng.random::<f64>();
        }
        let norm = l2_norm(row);
        row.iter_mut().for_each(|v| *v /= norm);
    }

    let map = gaussian_matrix(spec.visual_dim, spec.semantic_dim, spec.map_scale, &mut rng);
    let centers = semantics.matmul_t(&map).map(f64::tanh);

    let total = n * spec.samples_per_class;
    let mut features = Matrix::zeros(total, spec.visual_dim);
    let mut labels = Vec::with_capacity(total);
    for c in 0..n {
        let noise = gaussian_matrix(spec.samples_per_class, spec.visual_dim, spec.sigma, &mut rng);
        for s in 0..spec.samples_per_class {
            let r = labels.len();
            for (j, v) in features.row_mut(r).iter_mut().enumerate() {
                *v = centers[(c, j)] + noise[(s, j)];
            }
            labels.push(c);
        }
    }

    let dataset = ZslDataset {
        features,
        labels,
        semantics,
        class_names: (0..n).map(|c| format!("class_{c:02}")).collect(),
        split: SplitSpec::new((0..spec.num_seen).collect(), (spec.num_seen..n).collect(), None),
    };
    dataset.validate()?;
    Ok(SyntheticData { dataset, map, centers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_centers() {
        let spec = SyntheticSpec {
            sigma: 0.0,
            samples_per_class: 3,
            ..SyntheticSpec::default()
        };
        let d = make_synthetic(&spec).unwrap();
        for (row, &c) in d.dataset.features.row_iter().zip(&d.dataset.labels) {
            assert_eq!(row, d.centers.row(c));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::default();
        assert_eq!(make_synthetic(&spec).unwrap(), make_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 1, ..spec };
        assert_ne!(
            make_synthetic(&other).unwrap().map,
            make_synthetic(&SyntheticSpec::default()).unwrap().map
        );
    }

    #[test]
    fn semantics_are_sparse_unit_non_negative() {
        let d = make_synthetic(&SyntheticSpec::default()).unwrap();
        for row in d.dataset.semantics.row_iter() {
            assert!((l2_norm(row) - 1.0).abs() < 1e-12);
            assert_eq!(row.iter().filter(|&&v| v > 0.0).count(), 10);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}
