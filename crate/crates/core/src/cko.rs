//! Class knowledge overlay.
//!
//! Each class name is embedded with a word-vector table, classes are ranked by
//! pairwise similarity, and every class article is extended with the articles
//! of its `k` most similar classes.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{dot, euclidean, l2_norm, Matrix};

/// Word to vector lookup, all vectors the same width.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            vectors: HashMap::new(),
            dim,
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "embedding for '{word}' has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("embedding for '{word}' is not finite")));
        }
        self.vectors.insert(word.to_lowercase(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Parses the plain-text interchange format: `word v1 ... vd` per line.
    /// A leading `count dim` header line is accepted and skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            if fields.len() < 2 {
                return Err(Error::parse(origin, lineno, "expected a word followed by values"));
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, lineno, format!("bad number: {e}")))?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            t.insert(fields[0], values)
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        }
        table.ok_or_else(|| Error::parse(origin, 0, "embedding table is empty"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Mean of the vectors of the name's tokens (lowercased, split on
    /// whitespace and hyphens). Unknown tokens are skipped.
    pub fn embed_class_name(&self, name: &str) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::Config("embedding table is empty".into()));
        }
        let lowered = name.to_lowercase();
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for tok in lowered.split(|c: char| c.is_whitespace() || c == '-') {
            if let Some(v) = self.vectors.get(tok) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
        }
        if found == 0 {
            return Err(Error::MissingEmbedding(name.to_owned()));
        }
        if found > 1 {
            let n = found as f64;
            for s in &mut sum {
                *s /= n;
            }
        }
        Ok(sum)
    }
}

/// How class-name vectors are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Cosine,
    /// Negated Euclidean distance, so larger still means more similar.
    NegEuclidean,
}

impl Similarity {
    pub fn score(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Cosine => {
                let denom = l2_norm(a) * l2_norm(b);
                if denom == 0.0 {
                    0.0
                } else {
                    (dot(a, b) / denom).clamp(-1.0, 1.0)
                }
            }
            Similarity::NegEuclidean => -euclidean(a, b),
        }
    }
}

/// `n × n` class similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(Matrix);

impl SimilarityMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Validation(format!(
                "similarity matrix must be square, got {:?}",
                m.shape()
            )));
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Indices of the `k` classes most similar to `i`, most similar first.
    /// `i` itself is never returned; ties go to the smaller class id.
    pub fn top_k(&self, i: usize, k: usize, class_ids: &[usize]) -> Vec<usize> {
        let mut others: Vec<usize> = (0..self.n()).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            self.get(i, b)
                .total_cmp(&self.get(i, a))
                .then(class_ids[a].cmp(&class_ids[b]))
        });
        others.truncate(k);
        others
    }
}

pub fn similarity_matrix(table: &EmbeddingTable, names: &[&str], similarity: Similarity) -> Result<SimilarityMatrix> {
    let vectors = names
        .iter()
        .map(|n| table.embed_class_name(n))
        .collect::<Result<Vec<_>>>()?;
    let n = vectors.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = similarity.score(&vectors[i], &vectors[j]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    if similarity == Similarity::Cosine {
        // exact self-similarity even for vectors where rounding lands just below 1
        for i in 0..n {
            if l2_norm(&vectors[i]) > 0.0 {
                m[(i, i)] = 1.0;
            }
        }
    }
    Ok(SimilarityMatrix(m))
}

/// One class: identifier, display name, own article and overlaid article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRecord {
    pub class_id: usize,
    pub name: String,
    pub article: String,
    pub overlay: String,
}

impl ClassRecord {
    pub fn new(class_id: usize, name: impl Into<String>, article: impl Into<String>) -> Self {
        let article = article.into();
        Self {
            class_id,
            name: name.into(),
            overlay: article.clone(),
            article,
        }
    }
}

/// Sets each record's overlay to its own article followed by the articles of
/// its `k` most similar classes, newline separated, most similar first.
/// Records are aligned with the rows of `sm`.
pub fn overlay(records: &mut [ClassRecord], sm: &SimilarityMatrix, k: usize) -> Result<()> {
    let n = records.len();
    if sm.n() != n {
        return Err(Error::Usage(format!(
            "{n} records but similarity matrix is {}x{}",
            sm.n(),
            sm.n()
        )));
    }
    if k >= n.max(1) {
        return Err(Error::Config(format!(
            "overlay k = {k} must be smaller than the class count {n}"
        )));
    }
    let ids: Vec<usize> = records.iter().map(|r| r.class_id).collect();
    let overlays: Vec<String> = (0..n)
        .map(|i| {
            let mut text = records[i].article.clone();
            for j in sm.top_k(i, k, &ids) {
                text.push('\n');
                text.push_str(&records[j].article);
            }
            text
        })
        .collect();
    for (r, o) in records.iter_mut().zip(overlays) {
        r.overlay = o;
    }
    Ok(())
}
