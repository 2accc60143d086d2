//! Smoothed TF-IDF: raw counts times `ln((1 + N) / (1 + df)) + 1`, then L2
//! normalisation. Vocabulary columns are in lexicographic term order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::TokenSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

/// Dense, non-negative, unit-norm (or zero) document vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector(Vec<f64>);

impl SemanticVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        crate::nn::l2_norm(&self.0)
    }
}

impl TfIdfModel {
    pub fn fit(corpus: &[TokenSequence]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Config("cannot fit TF-IDF on an empty corpus".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in corpus {
            let unique: BTreeSet<&str> = doc.tokens().iter().map(String::as_str).collect();
            for term in unique {
                *df.entry(term).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocabulary.insert(term.to_owned(), i);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(Self {
            vocabulary,
            idf,
            doc_count: corpus.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    /// Terms in column order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    /// Out-of-vocabulary tokens are ignored; a document with no known token
    /// maps to the zero vector.
    pub fn transform(&self, doc: &TokenSequence) -> SemanticVector {
        let mut v = vec![0.0; self.dim()];
        for t in doc.tokens() {
            if let Some(&i) = self.vocabulary.get(t) {
                v[i] += 1.0;
            }
        }
        for (x, w) in v.iter_mut().zip(&self.idf) {
            *x *= w;
        }
        let norm = crate::nn::l2_norm(&v);
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        SemanticVector(v)
    }
}
