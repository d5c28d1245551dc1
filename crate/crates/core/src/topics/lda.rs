//! Collapsed Gibbs sampling for LDA, plus fold-in inference for new documents.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DocTopicScores, TopicModel};
use crate::corpus::{Corpus, Document, Vocabulary};
use crate::error::{Error, Result};
use crate::seed;

/// Training configuration. `hyper_alpha = None` means `50 / K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    pub hyper_alpha: Option<f64>,
    pub hyper_beta: f64,
    pub sweeps: usize,
    pub seed: u64,
    /// Reconcile count tables against assignments after every sweep.
    pub verify_counts: bool,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 10,
            hyper_alpha: None,
            hyper_beta: 0.01,
            sweeps: 500,
            seed: 0,
            verify_counts: cfg!(debug_assertions),
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.hyper_alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaReport {
    /// Documents dropped because no token survived the vocabulary filter.
    pub excluded: Vec<String>,
    pub tokens: usize,
}

/// Token assignments and the three count tables of the collapsed sampler.
#[derive(Debug, Clone)]
pub struct GibbsState {
    k: usize,
    v: usize,
    /// Flattened token word ids, documents back to back.
    words: Vec<u32>,
    doc_offsets: Vec<usize>,
    /// Per-token topic assignment.
    z: Vec<u32>,
    /// Document × topic counts.
    doc_topic: Vec<u32>,
    /// Word × topic counts (word-major for cache locality in the sweep).
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    seed: u64,
}

impl GibbsState {
    /// Random initial assignment of every token.
    pub fn new(docs: &[Vec<usize>], k: usize, v: usize, seed: u64, rng: &mut seed::Rng) -> Self {
        let mut words = Vec::new();
        let mut doc_offsets = Vec::with_capacity(docs.len() + 1);
        doc_offsets.push(0);
        for d in docs {
            words.extend(d.iter().map(|&w| w as u32));
            doc_offsets.push(words.len());
        }
        let mut state = GibbsState {
            k,
            v,
            z: Vec::with_capacity(words.len()),
            doc_topic: vec![0; docs.len() * k],
            word_topic: vec![0; v * k],
            topic_total: vec![0; k],
            words,
            doc_offsets,
            seed,
        };
        for d in 0..docs.len() {
            for i in state.doc_offsets[d]..state.doc_offsets[d + 1] {
                let t = rng.gen_range(0..k);
                let w = state.words[i] as usize;
                state.z.push(t as u32);
                state.doc_topic[d * k + t] += 1;
                state.word_topic[w * k + t] += 1;
                state.topic_total[t] += 1;
            }
        }
        state
    }

    pub fn num_docs(&self) -> usize {
        self.doc_offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.words.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignments(&self) -> &[u32] {
        &self.z
    }

    /// One pass over every token, resampling its topic from the collapsed
    /// conditional `(n_dt + α)(n_wt + β) / (n_t + Vβ)`.
    pub fn sweep(&mut self, alpha: f64, beta: f64, rng: &mut seed::Rng) {
        let k = self.k;
        let vbeta = self.v as f64 * beta;
        let mut cumulative = vec![0.0f64; k];
        for d in 0..self.num_docs() {
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for i in self.doc_offsets[d]..self.doc_offsets[d + 1] {
                let w = self.words[i] as usize;
                let old = self.z[i] as usize;
                let wt = &mut self.word_topic[w * k..(w + 1) * k];
                dt[old] -= 1;
                wt[old] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (dt[t] as f64 + alpha) * (wt[t] as f64 + beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    cumulative[t] = total;
                }
                let new = draw(&cumulative, total, rng);

                self.z[i] = new as u32;
                dt[new] += 1;
                wt[new] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Rebuild all count tables from the assignments and compare exactly.
    pub fn check_consistency(&self) -> Result<()> {
        let k = self.k;
        let mut doc_topic = vec![0u32; self.doc_topic.len()];
        let mut word_topic = vec![0u32; self.word_topic.len()];
        let mut topic_total = vec![0u32; k];
        for d in 0..self.num_docs() {
            for i in self.doc_offsets[d]..self.doc_offsets[d + 1] {
                let t = self.z[i] as usize;
                doc_topic[d * k + t] += 1;
                word_topic[self.words[i] as usize * k + t] += 1;
                topic_total[t] += 1;
            }
        }
        let doc_sum: u64 = self.doc_topic.iter().map(|&c| c as u64).sum();
        if doc_topic != self.doc_topic
            || word_topic != self.word_topic
            || topic_total != self.topic_total
            || doc_sum != self.num_tokens() as u64
        {
            return Err(Error::Integrity("Gibbs count tables disagree with assignments".into()));
        }
        Ok(())
    }

    /// Smoothed topic-word distributions `(n_wt + β) / (n_t + Vβ)`, row-major K×V.
    pub fn word_topic_distribution(&self, beta: f64) -> Vec<f64> {
        let (k, v) = (self.k, self.v);
        let mut out = vec![0.0; k * v];
        for t in 0..k {
            let denom = self.topic_total[t] as f64 + v as f64 * beta;
            let row = &mut out[t * v..(t + 1) * v];
            for (w, cell) in row.iter_mut().enumerate() {
                *cell = (self.word_topic[w * k + t] as f64 + beta) / denom;
            }
            renormalize(row);
        }
        out
    }
}

/// Inverse-CDF draw from an unnormalized cumulative table.
fn draw(cumulative: &[f64], total: f64, rng: &mut seed::Rng) -> usize {
    let u = rng.gen::<f64>() * total;
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Divide by the sum so rounding error does not accumulate past 1e-9.
fn renormalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    for x in row.iter_mut() {
        *x /= s;
    }
}

pub fn train_lda(corpus: &Corpus, vocab: &Vocabulary, config: &LdaConfig) -> Result<TopicModel> {
    train_lda_with_report(corpus, vocab, config).map(|(m, _)| m)
}

pub fn train_lda_with_report(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &LdaConfig,
) -> Result<(TopicModel, LdaReport)> {
    if config.k < 1 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if config.sweeps < 1 {
        return Err(Error::Config("sweeps must be at least 1".into()));
    }
    if !(config.hyper_beta > 0.0) {
        return Err(Error::Config("hyper_beta must be positive".into()));
    }
    let alpha = config.alpha();
    let mut docs = Vec::with_capacity(corpus.len());
    let mut excluded = Vec::new();
    for doc in corpus {
        let toks = vocab.encode(&doc.norm_text);
        if toks.is_empty() {
            log::warn!("document {} has no in-vocabulary tokens; excluded from training", doc.id);
            excluded.push(doc.id.clone());
        } else {
            docs.push(toks);
        }
    }
    if docs.is_empty() {
        return Err(Error::Config("every document was excluded: no in-vocabulary tokens".into()));
    }

    let mut rng = seed::rng(config.seed);
    let mut state = GibbsState::new(&docs, config.k, vocab.len(), config.seed, &mut rng);
    for sweep in 0..config.sweeps {
        state.sweep(alpha, config.hyper_beta, &mut rng);
        if config.verify_counts {
            state.check_consistency()?;
        }
        log::trace!("lda sweep {sweep} done");
    }
    let model = TopicModel::new(
        vocab.clone(),
        state.word_topic_distribution(config.hyper_beta),
        alpha,
        config.hyper_beta,
    )?;
    let report = LdaReport {
        excluded,
        tokens: state.num_tokens(),
    };
    Ok((model, report))
}

/// Fold-in estimate of a document's topic distribution with `P(w|t)` held
/// fixed.
pub fn infer_doc_topics(
    model: &TopicModel,
    doc: &Document,
    fold_in_sweeps: usize,
    seed: u64,
) -> Result<DocTopicScores> {
    let toks = model.vocabulary().encode(&doc.norm_text);
    if toks.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    Ok(infer_tokens(model, &toks, fold_in_sweeps, seed))
}

/// Fold-in on pre-encoded word indices; `tokens` must be non-empty.
pub fn infer_tokens(model: &TopicModel, tokens: &[usize], fold_in_sweeps: usize, seed: u64) -> DocTopicScores {
    assert!(!tokens.is_empty());
    let k = model.k();
    let alpha = model.hyper_alpha();
    let mut rng = seed::rng(seed);
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = tokens
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();
    let mut cumulative = vec![0.0; k];
    for _ in 0..fold_in_sweeps {
        for (i, &w) in tokens.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (counts[t] as f64 + alpha) * model.score(w, t);
                cumulative[t] = total;
            }
            let new = if total > 0.0 {
                draw(&cumulative, total, &mut rng)
            } else {
                rng.gen_range(0..k)
            };
            z[i] = new;
            counts[new] += 1;
        }
    }
    let denom = tokens.len() as f64 + k as f64 * alpha;
    let mut theta: Vec<f64> = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
    renormalize(&mut theta);
    DocTopicScores { theta }
}
