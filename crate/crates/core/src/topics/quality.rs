//! Topic coherence (NPMI over document co-occurrence), topic diversity, and
//! choosing the number of topics by their product.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::lda::{train_lda, LdaConfig};
use super::TopicModel;
use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};

/// Normalized PMI of a word pair from document frequencies.
///
/// Pairs that never co-occur score −1; pairs present in every document score 1.
fn npmi(df_i: usize, df_j: usize, df_ij: usize, n_docs: usize) -> f64 {
    if df_ij == 0 {
        return -1.0;
    }
    let n = n_docs as f64;
    let p_ij = df_ij as f64 / n;
    if df_ij == n_docs {
        return 1.0;
    }
    let p_i = df_i as f64 / n;
    let p_j = df_j as f64 / n;
    (p_ij / (p_i * p_j)).ln() / -p_ij.ln()
}

/// Pairwise NPMI for a word list against `corpus`, as a dense matrix
/// (diagonal left at 0).
pub fn npmi_table(words: &[&str], corpus: &Corpus) -> Vec<Vec<f64>> {
    let wanted: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let m = words.len();
    let mut df = vec![0usize; m];
    let mut co = vec![vec![0usize; m]; m];
    let mut present = Vec::with_capacity(m);
    for doc in corpus {
        present.clear();
        let mut seen = HashSet::new();
        for tok in doc.tokens() {
            if let Some(&i) = wanted.get(tok) {
                if seen.insert(i) {
                    present.push(i);
                }
            }
        }
        for (a, &i) in present.iter().enumerate() {
            df[i] += 1;
            for &j in &present[a + 1..] {
                co[i][j] += 1;
                co[j][i] += 1;
            }
        }
    }
    let n = corpus.len();
    let mut table = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                table[i][j] = npmi(df[i], df[j], co[i][j], n);
            }
        }
    }
    table
}

/// Mean NPMI over all pairs of each topic's `top_k` words.
pub fn per_topic_coherence(model: &TopicModel, corpus: &Corpus, top_k: usize) -> Result<Vec<f64>> {
    (0..model.k())
        .map(|t| {
            let words = model.top_words(t, top_k)?;
            let table = npmi_table(&words, corpus);
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    sum += table[i][j];
                    pairs += 1;
                }
            }
            // a single-word list has no pairs; treat it as perfectly coherent
            Ok(if pairs == 0 { 1.0 } else { sum / pairs as f64 })
        })
        .collect()
}

/// Coherence averaged over topics.
pub fn topic_coherence(model: &TopicModel, corpus: &Corpus, top_k: usize) -> Result<f64> {
    let per = per_topic_coherence(model, corpus, top_k)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Distinct words across every topic's top-`top_k` list, over `K · top_k`.
pub fn topic_diversity(model: &TopicModel, top_k: usize) -> f64 {
    let top_k = top_k.max(1).min(model.v());
    let mut distinct = HashSet::new();
    for t in 0..model.k() {
        distinct.extend(model.top_word_indices(t, top_k).expect("topic in range"));
    }
    distinct.len() as f64 / (model.k() * top_k) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub lda: LdaConfig,
    pub coherence_top_k: usize,
    pub diversity_top_k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            lda: LdaConfig::default(),
            coherence_top_k: 10,
            diversity_top_k: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: usize,
    pub coherence: f64,
    pub diversity: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCountSelection {
    pub chosen: usize,
    pub scores: Vec<CandidateScore>,
}

/// Train one model per candidate K and keep the one maximizing
/// coherence × diversity; ties go to the smaller K.
pub fn select_topic_count(
    corpus: &Corpus,
    vocab: &Vocabulary,
    candidates: &[usize],
    config: &SelectionConfig,
) -> Result<(TopicCountSelection, TopicModel)> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate topic counts".into()));
    }
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut scores = Vec::with_capacity(ks.len());
    let mut best: Option<(f64, TopicModel)> = None;
    for &k in &ks {
        let lda = LdaConfig {
            k,
            ..config.lda.clone()
        };
        let model = train_lda(corpus, vocab, &lda)?;
        let coherence = topic_coherence(&model, corpus, config.coherence_top_k)?;
        let diversity = topic_diversity(&model, config.diversity_top_k);
        let product = coherence * diversity;
        log::info!("K = {k}: coherence {coherence:.4}, diversity {diversity:.4}, product {product:.4}");
        scores.push(CandidateScore {
            k,
            coherence,
            diversity,
            product,
        });
        if best.as_ref().map_or(true, |(p, _)| product > *p) {
            best = Some((product, model));
        }
    }
    let (_, model) = best.expect("at least one candidate");
    Ok((
        TopicCountSelection {
            chosen: model.k(),
            scores,
        },
        model,
    ))
}
