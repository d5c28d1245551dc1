//! Scoring of externally trained embedding-topic-model parameters.
//!
//! Each topic's word distribution is `softmax_w(rho_w · alpha_t)`, where `rho`
//! holds one embedding per vocabulary word and `alpha` one per topic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TopicModel;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtmParameters {
    /// V × E word embeddings.
    pub rho: Vec<Vec<f64>>,
    /// K × E topic embeddings.
    pub alpha: Vec<Vec<f64>>,
}

impl EtmParameters {
    pub fn load(path: &Path) -> Result<Self> {
        fsutil::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_json_atomic(path, self)
    }

    /// Embedding dimension, after checking both matrices agree on it.
    pub fn validate(&self) -> Result<usize> {
        let dim = self
            .rho
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Shape("rho has no rows".into()))?;
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be at least 1".into()));
        }
        if self.alpha.is_empty() {
            return Err(Error::Shape("alpha has no rows".into()));
        }
        for (name, m) in [("rho", &self.rho), ("alpha", &self.alpha)] {
            for (i, row) in m.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::Shape(format!(
                        "{name} row {i} has dimension {}, expected {dim}",
                        row.len()
                    )));
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Shape(format!("{name} row {i} has a non-finite entry")));
                }
            }
        }
        Ok(dim)
    }

    /// Build a [`TopicModel`] over `vocabulary` (whose size must equal the
    /// number of `rho` rows). `hyper_alpha` is the document-topic prior used
    /// for fold-in inference.
    pub fn into_model(&self, vocabulary: Vocabulary, hyper_alpha: f64) -> Result<TopicModel> {
        if vocabulary.len() != self.rho.len() {
            return Err(Error::Shape(format!(
                "rho has {} rows but the vocabulary has {} words",
                self.rho.len(),
                vocabulary.len()
            )));
        }
        let rows = etm_word_topic(self)?;
        TopicModel::new(vocabulary, rows.concat(), hyper_alpha, 0.0)
    }
}

/// K × V matrix whose row `t` is the softmax over words of `rho · alpha_t`.
pub fn etm_word_topic(params: &EtmParameters) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    Ok(params
        .alpha
        .iter()
        .map(|topic| {
            let logits: Vec<f64> = params.rho.iter().map(|word| dot(word, topic)).collect();
            softmax(&logits)
        })
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
