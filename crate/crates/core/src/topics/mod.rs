//! Topic models: per-topic word scores `P(w|t)` and per-document topic scores.

pub(crate) mod etm;
mod lda;
mod quality;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::fsutil;

pub use etm::{etm_word_topic, EtmParameters};
pub use lda::{infer_doc_topics, infer_tokens, train_lda, train_lda_with_report, GibbsState, LdaConfig, LdaReport};
pub use quality::{
    npmi_table, per_topic_coherence, select_topic_count, topic_coherence, topic_diversity, CandidateScore,
    SelectionConfig, TopicCountSelection,
};

/// Tolerance for probability-simplex checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A K×V matrix of word-given-topic probabilities over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    k: usize,
    vocabulary: Vocabulary,
    /// Row-major, K rows of length V.
    word_topic: Vec<f64>,
    hyper_alpha: f64,
    hyper_beta: f64,
}

impl TopicModel {
    pub fn new(
        vocabulary: Vocabulary,
        word_topic: Vec<f64>,
        hyper_alpha: f64,
        hyper_beta: f64,
    ) -> Result<Self> {
        let v = vocabulary.len();
        if v == 0 {
            return Err(Error::Shape("topic model needs a non-empty vocabulary".into()));
        }
        if word_topic.is_empty() || word_topic.len() % v != 0 {
            return Err(Error::Shape(format!(
                "word_topic has {} entries, not a positive multiple of V = {v}",
                word_topic.len()
            )));
        }
        let k = word_topic.len() / v;
        for (t, row) in word_topic.chunks(v).enumerate() {
            check_simplex(row).map_err(|m| Error::Integrity(format!("topic {t}: {m}")))?;
        }
        if !(hyper_alpha.is_finite() && hyper_alpha > 0.0) {
            return Err(Error::Config(format!("hyper_alpha must be positive, got {hyper_alpha}")));
        }
        Ok(TopicModel {
            k,
            vocabulary,
            word_topic,
            hyper_alpha,
            hyper_beta,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn hyper_alpha(&self) -> f64 {
        self.hyper_alpha
    }

    pub fn hyper_beta(&self) -> f64 {
        self.hyper_beta
    }

    /// `P(w|t)` for every word of topic `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        let v = self.v();
        &self.word_topic[t * v..(t + 1) * v]
    }

    pub fn word_topic(&self) -> &[f64] {
        &self.word_topic
    }

    /// `L(w, t)` by word index.
    pub fn score(&self, word: usize, t: usize) -> f64 {
        self.word_topic[t * self.v() + word]
    }

    /// The `k` highest-scoring words of topic `t`, descending, ties broken by
    /// vocabulary index.
    pub fn top_words(&self, t: usize, k: usize) -> Result<Vec<&str>> {
        Ok(self
            .top_word_indices(t, k)?
            .into_iter()
            .map(|i| self.vocabulary.word(i))
            .collect())
    }

    pub fn top_word_indices(&self, t: usize, k: usize) -> Result<Vec<usize>> {
        if t >= self.k {
            return Err(Error::Index { index: t, len: self.k });
        }
        let row = self.row(t);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        let k = k.min(row.len());
        let by_score = |&a: &usize, &b: &usize| row[b].total_cmp(&row[a]).then(a.cmp(&b));
        if k < idx.len() {
            idx.select_nth_unstable_by(k, by_score);
            idx.truncate(k);
        }
        idx.sort_unstable_by(by_score);
        Ok(idx)
    }

    /// Content hash over K, the vocabulary and the exact matrix bits.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(self.word_topic.len() * 8 + 128);
        bytes.extend_from_slice(&(self.k as u64).to_le_bytes());
        bytes.extend_from_slice(self.vocabulary.content_hash().as_bytes());
        bytes.extend_from_slice(&self.hyper_alpha.to_bits().to_le_bytes());
        bytes.extend_from_slice(&self.hyper_beta.to_bits().to_le_bytes());
        for x in &self.word_topic {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        fsutil::sha256_hex(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_json_atomic(path, &ModelFile::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = fsutil::read_json(path)?;
        file.try_into()
    }
}

/// On-disk model: header fields followed by the matrix, one JSON array per
/// topic.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    k: usize,
    v: usize,
    hyper_alpha: f64,
    hyper_beta: f64,
    vocabulary_hash: String,
    vocabulary: Vocabulary,
    word_topic: Vec<Vec<f64>>,
}

impl From<&TopicModel> for ModelFile {
    fn from(m: &TopicModel) -> Self {
        ModelFile {
            k: m.k,
            v: m.v(),
            hyper_alpha: m.hyper_alpha,
            hyper_beta: m.hyper_beta,
            vocabulary_hash: m.vocabulary.content_hash(),
            vocabulary: m.vocabulary.clone(),
            word_topic: m.word_topic.chunks(m.v()).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<ModelFile> for TopicModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.vocabulary.len() != f.v || f.word_topic.len() != f.k {
            return Err(Error::Shape(format!(
                "model header says K={} V={}, body has K={} V={}",
                f.k,
                f.v,
                f.word_topic.len(),
                f.vocabulary.len()
            )));
        }
        if f.vocabulary.content_hash() != f.vocabulary_hash {
            return Err(Error::Integrity("model vocabulary does not match its hash".into()));
        }
        if f.word_topic.iter().any(|r| r.len() != f.v) {
            return Err(Error::Shape("ragged word_topic matrix".into()));
        }
        let flat = f.word_topic.concat();
        TopicModel::new(f.vocabulary, flat, f.hyper_alpha, f.hyper_beta)
    }
}

/// A document's topic distribution `L(D, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTopicScores {
    pub theta: Vec<f64>,
}

impl DocTopicScores {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        check_simplex(&theta).map_err(Error::Integrity)?;
        Ok(DocTopicScores { theta })
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    /// Highest-scoring topic, lowest index on ties.
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (t, &x) in self.theta.iter().enumerate() {
            if x > self.theta[best] {
                best = t;
            }
        }
        best
    }
}

fn check_simplex(row: &[f64]) -> std::result::Result<(), String> {
    if row.is_empty() {
        return Err("empty distribution".into());
    }
    let mut sum = 0.0;
    for &x in row {
        if !(0.0..=1.0).contains(&x) {
            return Err(format!("entry {x} outside [0, 1]"));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}
