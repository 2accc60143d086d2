use crate::error::{Error, Result};
use crate::nn::{squared_distance, Matrix};

/// Euclidean k-nearest-neighbour vote classifier.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    references: Matrix,
    labels: Vec<usize>,
    k: usize,
}

impl KnnClassifier {
    pub fn new(references: Matrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        if references.rows() != labels.len() {
            return Err(Error::Usage(format!(
                "{} references but {} labels",
                references.rows(),
                labels.len()
            )));
        }
        if k == 0 || references.rows() < k {
            return Err(Error::Usage(format!(
                "kNN with K = {k} needs at least K references, got {}",
                references.rows()
            )));
        }
        Ok(Self { references, labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `K` nearest references, nearest first; equal distances
    /// go to the lower index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .references
            .row_iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(query, r), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn check(&self, queries: &Matrix) -> Result<()> {
        if queries.cols() != self.references.cols() {
            return Err(Error::Usage(format!(
                "query dimension {} but reference dimension {}",
                queries.cols(),
                self.references.cols()
            )));
        }
        Ok(())
    }

    /// Per query, the majority label among the `K` neighbours and its vote
    /// fraction. Ties go to the smallest label.
    pub fn predict_proba(&self, queries: &Matrix) -> Result<Vec<(usize, f64)>> {
        self.check(queries)?;
        Ok(queries
            .row_iter()
            .map(|q| {
                let mut votes: Vec<usize> = self.neighbors(q).into_iter().map(|i| self.labels[i]).collect();
                votes.sort_unstable();
                let mut best = (votes[0], 0usize);
                let mut i = 0;
                while i < votes.len() {
                    let j = i + votes[i..].iter().take_while(|&&v| v == votes[i]).count();
                    if j - i > best.1 {
                        best = (votes[i], j - i);
                    }
                    i = j;
                }
                (best.0, best.1 as f64 / self.k as f64)
            })
            .collect())
    }

    /// Vote fraction of each of `classes` (one column per entry, in order).
    pub fn vote_scores(&self, queries: &Matrix, classes: &[usize]) -> Result<Matrix> {
        self.check(queries)?;
        let mut out = Matrix::zeros(queries.rows(), classes.len());
        for (r, q) in queries.row_iter().enumerate() {
            for i in self.neighbors(q) {
                if let Some(c) = classes.iter().position(|&c| c == self.labels[i]) {
                    out[(r, c)] += 1.0 / self.k as f64;
                }
            }
        }
        Ok(out)
    }
}
