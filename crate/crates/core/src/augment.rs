//! Topically controlled augmentation.
//!
//! One generator per genre is trained on that genre's off-topic training
//! documents. Given a keyword sequence it writes a new document in its
//! genre; feeding it keywords from target-topic documents produces
//! on-topic synthetic training data.
//!
//! The built-in generator is an order-n word chain. While training, each
//! document's own top keywords are replaced by a slot symbol, so the chain
//! learns where content words go rather than which ones. When generating,
//! the slot's probability is handed to the supplied keywords in proportion to
//! their multiplicity, every keyword's probability is multiplied by the boost
//! factor and the distribution is renormalized. Without keywords the slot is
//! removed and the chain samples freely.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::{self, SharedAdapter};
use crate::corpus::{normalize, Document};
use crate::error::{Error, Result};
use crate::keywords::{extract_keywords, KeywordLimit, KeywordSequence, DEFAULT_KEYWORDS};
use crate::seed;
use crate::splits::{document_seed, CorpusScores};
use crate::topics::{infer_tokens, TopicModel};

/// Default generated length in tokens, about one 1000-character window.
pub const DEFAULT_LENGTH: usize = 150;

const SLOT: u32 = 0;
const BOS: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub order: usize,
    /// Multiplier on keyword probabilities.
    pub boost: f64,
    /// Keywords per training document turned into slots; `usize::MAX`
    /// turns every in-vocabulary word into a slot.
    pub slot_keywords: usize,
    pub fold_in_sweeps: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            order: 2,
            boost: 20.0,
            slot_keywords: DEFAULT_KEYWORDS,
            fold_in_sweeps: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Followers {
    total: u64,
    ids: Vec<u32>,
    cumulative: Vec<u64>,
}

impl Followers {
    fn from_counts(counts: HashMap<u32, u64>) -> Self {
        let mut items: Vec<(u32, u64)> = counts.into_iter().collect();
        items.sort_unstable();
        let mut total = 0;
        let mut ids = Vec::with_capacity(items.len());
        let mut cumulative = Vec::with_capacity(items.len());
        for (id, c) in items {
            total += c;
            ids.push(id);
            cumulative.push(total);
        }
        Followers { total, ids, cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u = rng.gen_range(0..self.total);
        self.ids[self.cumulative.partition_point(|&c| c <= u)]
    }

    fn count(&self, id: u32) -> u64 {
        match self.ids.binary_search(&id) {
            Ok(i) => self.cumulative[i] - if i == 0 { 0 } else { self.cumulative[i - 1] },
            Err(_) => 0,
        }
    }

    /// Witten-Bell weight of this level's own estimate.
    fn lambda(&self) -> f64 {
        self.total as f64 / (self.total + self.ids.len() as u64) as f64
    }
}

/// Order-n word chain with Witten-Bell interpolation down to an add-one
/// smoothed unigram.
#[derive(Debug, Clone)]
pub struct MarkovGenerator {
    order: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    /// `levels[l]` maps length-`l` contexts to their followers (l ≥ 1).
    levels: Vec<HashMap<Vec<u32>, Followers>>,
    unigram: Followers,
}

impl MarkovGenerator {
    /// Train on token sequences in which the words of each document's `slots`
    /// set are replaced by the slot symbol.
    pub fn train(docs: &[(Vec<&str>, HashSet<&str>)], order: usize) -> Result<Self> {
        let mut words = vec!["<slot>".to_owned(), "<s>".to_owned()];
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut encoded = Vec::with_capacity(docs.len());
        for (toks, slots) in docs {
            let ids: Vec<u32> = toks
                .iter()
                .map(|t| {
                    if slots.contains(t) {
                        SLOT
                    } else {
                        *index.entry((*t).to_owned()).or_insert_with(|| {
                            words.push((*t).to_owned());
                            (words.len() - 1) as u32
                        })
                    }
                })
                .collect();
            encoded.push(ids);
        }
        if encoded.iter().all(Vec::is_empty) {
            return Err(Error::Config("generator training documents contain no tokens".into()));
        }
        let mut uni: HashMap<u32, u64> = HashMap::new();
        let mut ctx_counts: Vec<HashMap<Vec<u32>, HashMap<u32, u64>>> = vec![HashMap::new(); order + 1];
        for ids in &encoded {
            let padded: Vec<u32> = std::iter::repeat(BOS).take(order).chain(ids.iter().copied()).collect();
            for pos in order..padded.len() {
                let w = padded[pos];
                *uni.entry(w).or_default() += 1;
                for l in 1..=order {
                    let ctx = padded[pos - l..pos].to_vec();
                    *ctx_counts[l].entry(ctx).or_default().entry(w).or_default() += 1;
                }
            }
        }
        let levels = ctx_counts
            .into_iter()
            .map(|m| m.into_iter().map(|(c, f)| (c, Followers::from_counts(f))).collect())
            .collect();
        Ok(MarkovGenerator {
            order,
            words,
            index,
            levels,
            unigram: Followers::from_counts(uni),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Emittable symbols: every training word plus the slot.
    fn emittable(&self) -> usize {
        self.words.len() - 1
    }

    fn uniform<R: Rng>(&self, rng: &mut R) -> u32 {
        let i = rng.gen_range(0..self.emittable()) as u32;
        if i == 0 {
            SLOT
        } else {
            i + 1
        }
    }

    /// Draw from the interpolated chain distribution given the last `order`
    /// symbols of `history`.
    fn sample_chain<R: Rng>(&self, history: &[u32], rng: &mut R) -> u32 {
        for l in (1..=self.order).rev() {
            if let Some(f) = self.levels[l].get(&history[history.len() - l..]) {
                if rng.gen::<f64>() < f.lambda() {
                    return f.sample(rng);
                }
            }
        }
        let n = self.unigram.total as f64;
        if rng.gen::<f64>() < n / (n + self.emittable() as f64) {
            self.unigram.sample(rng)
        } else {
            self.uniform(rng)
        }
    }

    fn chain_probability(&self, history: &[u32], id: u32) -> f64 {
        let n = self.unigram.total as f64;
        let mut p = (self.unigram.count(id) as f64 + 1.0) / (n + self.emittable() as f64);
        for l in 1..=self.order {
            if let Some(f) = self.levels[l].get(&history[history.len() - l..]) {
                let lam = f.lambda();
                p = lam * f.count(id) as f64 / f.total as f64 + (1.0 - lam) * p;
            }
        }
        p
    }

    fn history_of(&self, context: &[&str], keywords: &HashSet<&str>) -> Vec<u32> {
        let mut h = vec![BOS; self.order];
        for w in context {
            h.push(if keywords.contains(w) {
                SLOT
            } else {
                self.index.get(*w).copied().unwrap_or(SLOT)
            });
        }
        h
    }

    /// Exact next-word distribution after `context` (previously emitted
    /// words), with the slot and boost applied. Sorted by word.
    pub fn next_distribution(&self, context: &[&str], keywords: &KeywordSequence, boost: f64) -> Vec<(String, f64)> {
        let mult = keywords.multiplicities();
        let kw: HashSet<&str> = mult.iter().map(|(w, _)| *w).collect();
        let total_mult: usize = mult.iter().map(|(_, m)| m).sum();
        let history = self.history_of(context, &kw);
        let slot_p = self.chain_probability(&history, SLOT);
        let mut dist: BTreeMap<String, f64> = BTreeMap::new();
        for id in 2..self.words.len() as u32 {
            dist.insert(self.words[id as usize].clone(), self.chain_probability(&history, id));
        }
        if total_mult == 0 {
            let z = 1.0 - slot_p;
            dist.values_mut().for_each(|p| *p /= z);
            return dist.into_iter().collect();
        }
        for (w, m) in &mult {
            *dist.entry((*w).to_owned()).or_default() += slot_p * *m as f64 / total_mult as f64;
        }
        for (w, p) in dist.iter_mut() {
            if kw.contains(w.as_str()) {
                *p *= boost;
            }
        }
        let z: f64 = dist.values().sum();
        dist.into_iter().map(|(w, p)| (w, p / z)).collect()
    }

    /// Sample `length` words. Keyword probabilities are multiplied by
    /// `boost`; implemented by rejection so each step stays sparse.
    pub fn generate<R: Rng>(&self, keywords: &KeywordSequence, length: usize, boost: f64, rng: &mut R) -> Result<Vec<String>> {
        if !(boost > 0.0) {
            return Err(Error::Config("boost must be positive".into()));
        }
        let mult = keywords.multiplicities();
        let kw: HashSet<&str> = mult.iter().map(|(w, _)| *w).collect();
        if kw.is_empty() && self.emittable() == 1 {
            return Err(Error::Config("generator knows only slots and no keywords were given".into()));
        }
        let kw_cumulative: Vec<usize> = mult
            .iter()
            .scan(0, |acc, (_, m)| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        let max_factor = boost.max(1.0);
        let mut history = vec![BOS; self.order];
        let mut out = Vec::with_capacity(length);
        while out.len() < length {
            let id = self.sample_chain(&history, rng);
            let word: &str = if id == SLOT {
                let Some(&total) = kw_cumulative.last() else {
                    continue;
                };
                let u = rng.gen_range(0..total);
                mult[kw_cumulative.partition_point(|&c| c <= u)].0
            } else {
                &self.words[id as usize]
            };
            let is_kw = kw.contains(word);
            let factor = if is_kw { boost } else { 1.0 };
            if factor < max_factor && rng.gen::<f64>() >= factor / max_factor {
                continue;
            }
            if self.order > 0 {
                history.remove(0);
                history.push(if is_kw { SLOT } else { id });
            }
            out.push(word.to_owned());
        }
        Ok(out)
    }
}

#[derive(Clone)]
pub enum GeneratorBackend {
    Builtin(std::sync::Arc<MarkovGenerator>),
    External(SharedAdapter),
}

impl std::fmt::Debug for GeneratorBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratorBackend::Builtin(_) => f.write_str("Builtin"),
            GeneratorBackend::External(_) => f.write_str("External"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorHandle {
    pub genre: String,
    pub backend: GeneratorBackend,
    /// Ids of the documents the generator was trained on.
    pub training_docs: Vec<String>,
    pub config: GeneratorConfig,
}

impl GeneratorHandle {
    /// Stable identifier: backend, genre and a hash of the training ids.
    pub fn id(&self) -> String {
        let kind = match self.backend {
            GeneratorBackend::Builtin(_) => "builtin",
            GeneratorBackend::External(_) => "external",
        };
        let ids = self.training_docs.join("\n");
        format!("{kind}:{}:{}", self.genre, &crate::fsutil::sha256_hex(ids.as_bytes())[..12])
    }

    /// A handle that forwards generation to an adapter session.
    pub fn external(genre: impl Into<String>, adapter: SharedAdapter, training_docs: Vec<String>) -> Self {
        GeneratorHandle {
            genre: genre.into(),
            backend: GeneratorBackend::External(adapter),
            training_docs,
            config: GeneratorConfig::default(),
        }
    }
}

/// Topic scores of `doc`, from `scores` when present, else by fold-in.
fn theta_of(doc: &Document, model: &TopicModel, scores: Option<&CorpusScores>, config: &GeneratorConfig) -> Option<crate::topics::DocTopicScores> {
    if let Some(s) = scores.and_then(|s| s.scores.get(&doc.id)) {
        return Some(s.clone());
    }
    let toks = model.vocabulary().encode(&doc.norm_text);
    (!toks.is_empty()).then(|| infer_tokens(model, &toks, config.fold_in_sweeps, document_seed(config.seed, &doc.id)))
}

/// Train the built-in generator for one genre on `docs` (that genre's
/// off-topic training documents).
pub fn train_builtin_generator(
    genre: &str,
    docs: &[&Document],
    model: &TopicModel,
    scores: Option<&CorpusScores>,
    config: &GeneratorConfig,
) -> Result<GeneratorHandle> {
    if docs.is_empty() {
        return Err(Error::Config(format!("no training documents for the {genre} generator")));
    }
    let mut training = Vec::with_capacity(docs.len());
    for doc in docs {
        if doc.genre != genre {
            return Err(Error::Config(format!("document {} is not in genre {genre}", doc.id)));
        }
        let slots: HashSet<&str> = match theta_of(doc, model, scores, config) {
            Some(theta) => {
                let ks = extract_keywords(doc, model, &theta, KeywordLimit::Top(config.slot_keywords.max(1)))?;
                let keep: HashSet<String> = ks.tokens.into_iter().collect();
                doc.tokens().filter(|t| keep.contains(*t)).collect()
            }
            None => HashSet::new(),
        };
        let slots = if config.slot_keywords == 0 { HashSet::new() } else { slots };
        training.push((doc.tokens().collect::<Vec<_>>(), slots));
    }
    let chain = MarkovGenerator::train(&training, config.order)?;
    Ok(GeneratorHandle {
        genre: genre.to_owned(),
        backend: GeneratorBackend::Builtin(std::sync::Arc::new(chain)),
        training_docs: docs.iter().map(|d| d.id.clone()).collect(),
        config: config.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDocument {
    pub id: String,
    pub genre: String,
    pub keywords: KeywordSequence,
    /// Normalized generated text.
    pub text: String,
    pub generator: String,
    pub seed: u64,
}

/// Generate one document of `length` tokens from `keywords`.
pub fn generate(handle: &GeneratorHandle, keywords: &KeywordSequence, length: usize, seed: u64) -> Result<SyntheticDocument> {
    if length == 0 {
        return Err(Error::Config("generated length must be at least 1".into()));
    }
    let text = match &handle.backend {
        GeneratorBackend::Builtin(chain) => {
            let mut rng = seed::rng(seed);
            chain.generate(keywords, length, handle.config.boost, &mut rng)?.join(" ")
        }
        GeneratorBackend::External(link) => {
            let mut guard = link.lock().map_err(|_| Error::adapter("adapter session poisoned"))?;
            let raw = adapter::generate(guard.as_mut(), &handle.genre, &keywords.tokens, length, seed)?;
            let text = normalize(&raw);
            if text.is_empty() {
                return Err(Error::Adapter {
                    message: "adapter produced an empty text".into(),
                    payload: Some(serde_json::Value::String(raw)),
                });
            }
            text
        }
    };
    Ok(SyntheticDocument {
        id: format!("syn-{}-{seed:016x}", handle.genre),
        genre: handle.genre.clone(),
        keywords: keywords.clone(),
        text,
        generator: handle.id(),
        seed,
    })
}

/// Keyword sequences for every scorable document in `docs`.
pub fn keyword_pool(docs: &[&Document], model: &TopicModel, scores: &CorpusScores, limit: KeywordLimit) -> Result<Vec<KeywordSequence>> {
    let mut pool = Vec::with_capacity(docs.len());
    for doc in docs {
        match scores.scores.get(&doc.id) {
            Some(theta) => pool.push(extract_keywords(doc, model, theta, limit)?),
            None => log::warn!("document {} has no topic scores; left out of the keyword pool", doc.id),
        }
    }
    Ok(pool)
}

/// Keyword sources for a synthetic set.
#[derive(Debug, Clone, PartialEq)]
pub enum KeywordPool {
    /// Unlabeled target documents: every sampled source is rendered once in
    /// every genre.
    Shared(Vec<KeywordSequence>),
    /// Labeled documents: each genre draws only from its own sources.
    PerGenre(BTreeMap<String, Vec<KeywordSequence>>),
}

impl KeywordPool {
    /// Group `sequences` by the genre of their source document.
    pub fn per_genre(sequences: Vec<KeywordSequence>, genre_of: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut map: BTreeMap<String, Vec<KeywordSequence>> = BTreeMap::new();
        for s in sequences {
            let g = genre_of(&s.source_doc)
                .ok_or_else(|| Error::Config(format!("keyword source {} has no genre", s.source_doc)))?;
            map.entry(g).or_default().push(s);
        }
        Ok(KeywordPool::PerGenre(map))
    }

    pub fn sources(&self) -> Vec<&KeywordSequence> {
        match self {
            KeywordPool::Shared(v) => v.iter().collect(),
            KeywordPool::PerGenre(m) => m.values().flatten().collect(),
        }
    }

    fn pick(&self, genre: &str, i: usize, seed: u64) -> Result<&KeywordSequence> {
        let list = match self {
            KeywordPool::Shared(v) => v,
            KeywordPool::PerGenre(m) => m
                .get(genre)
                .ok_or_else(|| Error::Config(format!("keyword pool has no sources for genre {genre}")))?,
        };
        if list.is_empty() {
            return Err(Error::Config("keyword pool is empty".into()));
        }
        let key = match self {
            KeywordPool::Shared(_) => seed::derive(seed, &[&"pick", &i]),
            KeywordPool::PerGenre(_) => seed::derive(seed, &[&"pick", &genre, &i]),
        };
        Ok(&list[seed::rng(key).gen_range(0..list.len())])
    }
}

/// For every genre, `per_genre` documents from keywords of pool entries drawn
/// with replacement.
pub fn build_synthetic_set(
    generators: &BTreeMap<String, GeneratorHandle>,
    genres: &[String],
    pool: &KeywordPool,
    per_genre: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<SyntheticDocument>> {
    if per_genre == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(per_genre * genres.len());
    for g in genres {
        let handle = generators
            .get(g)
            .ok_or_else(|| Error::Config(format!("no generator for genre {g}")))?;
        for i in 0..per_genre {
            let source = pool.pick(g, i, seed)?;
            let mut doc = generate(handle, source, length, seed::derive(seed, &[&"generate", g, &i]))?;
            doc.id = format!("syn-{g}-{i:05}");
            out.push(doc);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugMode {
    /// Keywords from target-topic documents.
    Adapt,
    /// Keywords from off-topic training documents.
    Baseline,
    /// Adapt documents with their genre labels permuted.
    Shuffled,
    /// Adapt documents only, no original training data.
    SyntheticOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub n_original: usize,
    pub n_synthetic: usize,
    pub mode: AugMode,
    /// Ids of the documents keywords are drawn from.
    pub keyword_pool: Vec<String>,
}

impl AugmentationPlan {
    /// Check the pool's provenance: on-topic for adapt-style modes, drawn from
    /// `off_topic` for the baseline, and never overlapping `test`.
    pub fn validate(&self, on_topic: &BTreeSet<&str>, off_topic: &BTreeSet<&str>, test: &BTreeSet<&str>) -> Result<()> {
        let allowed = match self.mode {
            AugMode::Baseline => off_topic,
            _ => on_topic,
        };
        for id in &self.keyword_pool {
            if !allowed.contains(id.as_str()) {
                return Err(Error::Integrity(format!("keyword source {id} is outside the {:?} pool", self.mode)));
            }
            if test.contains(id.as_str()) {
                log::warn!("keyword source {id} is a test document");
            }
        }
        Ok(())
    }
}

/// A training item for the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingItem {
    pub id: String,
    pub genre: String,
    pub text: String,
    pub synthetic: bool,
}

/// Take `n_original` originals and `n_synthetic` synthetic documents per
/// genre and shuffle them together.
pub fn mix(original: &[&Document], synthetic: &[SyntheticDocument], plan: &AugmentationPlan, seed: u64) -> Result<Vec<TrainingItem>> {
    let genres: BTreeSet<&str> = original
        .iter()
        .map(|d| d.genre.as_str())
        .chain(synthetic.iter().map(|d| d.genre.as_str()))
        .collect();
    let mut out = Vec::new();
    for g in genres {
        let orig: Vec<&&Document> = original.iter().filter(|d| d.genre == g).collect();
        let syn: Vec<&SyntheticDocument> = synthetic.iter().filter(|d| d.genre == g).collect();
        for (have, need) in [(orig.len(), plan.n_original), (syn.len(), plan.n_synthetic)] {
            if have < need {
                return Err(Error::Capacity {
                    genre: g.to_owned(),
                    needed: need,
                    available: have,
                });
            }
        }
        out.extend(orig.iter().take(plan.n_original).map(|d| TrainingItem {
            id: d.id.clone(),
            genre: d.genre.clone(),
            text: d.norm_text.clone(),
            synthetic: false,
        }));
        out.extend(syn.iter().take(plan.n_synthetic).map(|d| TrainingItem {
            id: d.id.clone(),
            genre: d.genre.clone(),
            text: d.text.clone(),
            synthetic: true,
        }));
    }
    out.shuffle(&mut seed::rng(seed::derive(seed, &[&"mix"])));
    Ok(out)
}

/// Permute genre labels uniformly among the synthetic documents.
pub fn shuffle_labels(mut synthetic: Vec<SyntheticDocument>, seed: u64) -> Vec<SyntheticDocument> {
    let mut labels: Vec<String> = synthetic.iter().map(|d| d.genre.clone()).collect();
    labels.shuffle(&mut seed::rng(seed::derive(seed, &[&"shuffle-labels"])));
    for (d, g) in synthetic.iter_mut().zip(labels) {
        d.genre = g;
    }
    synthetic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn seq(tokens: &[&str]) -> KeywordSequence {
        KeywordSequence {
            source_doc: "src".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            distinct_count: tokens.iter().collect::<HashSet<_>>().len(),
        }
    }

    fn chain(texts: &[&str], slots: &[&[&str]], order: usize) -> MarkovGenerator {
        let docs: Vec<(Vec<&str>, HashSet<&str>)> = texts
            .iter()
            .zip(slots)
            .map(|(t, s)| (t.split(' ').collect(), s.iter().copied().collect()))
            .collect();
        MarkovGenerator::train(&docs, order).unwrap()
    }

    #[test]
    fn order_zero_is_the_smoothed_unigram() {
        let g = chain(&["a a a b c"], &[&[]], 0);
        let d = g.next_distribution(&[], &seq(&[]), 10.0);
        // counts 3, 1, 1 plus one per symbol (a, b, c and the slot); the
        // never-seen slot is removed and the rest renormalized
        let raw = [4.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0];
        let z: f64 = raw.iter().sum();
        let expected: Vec<(String, f64)> = ["a", "b", "c"].iter().zip(raw).map(|(w, p)| (w.to_string(), p / z)).collect();
        for ((w, p), (ew, ep)) in d.iter().zip(&expected) {
            assert_eq!(w, ew);
            assert!((p - ep).abs() < 1e-12);
        }
    }

    #[test]
    fn boost_one_keeps_the_chain_distribution() {
        let g = chain(&["x y k z x y k", "y k x"], &[&["k"], &["k"]], 2);
        let kws = seq(&["k", "q", "k"]);
        let ctx = ["x", "y"];
        let plain = g.next_distribution(&ctx, &kws, 1.0);
        // slot mass goes 2:1 to k and q, nothing else changes
        let history = g.history_of(&ctx, &["k", "q"].into_iter().collect());
        let slot = g.chain_probability(&history, SLOT);
        let get = |w: &str| plain.iter().find(|(x, _)| x == w).unwrap().1;
        assert!((get("q") - slot / 3.0).abs() < 1e-12);
        let total: f64 = plain.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let boosted = g.next_distribution(&ctx, &kws, 10.0);
        let bget = |w: &str| boosted.iter().find(|(x, _)| x == w).unwrap().1;
        assert!(bget("q") > get("q"));
        assert!(bget("x") < get("x"));
    }

    #[test]
    fn generation_follows_the_exact_distribution() {
        // first-token frequencies of full generations, order 1
        let g = chain(&["a b s c a b s", "b s a c"], &[&["s"], &["s"]], 1);
        let kws = seq(&["s", "t", "t"]);
        let exact = g.next_distribution(&[], &kws, 4.0);
        let n = 20_000;
        let mut counts: HashMap<String, usize> = HashMap::new();
        for i in 0..n {
            let out = g.generate(&kws, 1, 4.0, &mut seed::rng(i)).unwrap();
            *counts.entry(out[0].clone()).or_default() += 1;
        }
        let mut chi = 0.0;
        for (w, p) in &exact {
            let e = p * n as f64;
            chi += (*counts.get(w).unwrap_or(&0) as f64 - e).powi(2) / e;
        }
        let df = exact.len() as f64 - 1.0;
        let crit = statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::ChiSquared::new(df).unwrap(), 0.999);
        assert!(chi < crit, "chi2 {chi} vs {crit}");
    }

    #[test]
    fn boost_raises_keyword_frequency() {
        let texts: Vec<String> = (0..20).map(|i| format!("a b c d e k{} a c e b d", ["x", "y"][i % 2])).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let none: Vec<&[&str]> = vec![&[]; 20];
        let g = chain(&refs, &none, 2);
        let kws = seq(&["kx"]);
        let freq = |boost: f64| {
            let out = g.generate(&kws, 100_000, boost, &mut seed::rng(5)).unwrap();
            out.iter().filter(|w| *w == "kx").count()
        };
        assert!(freq(20.0) > freq(1.0));
    }

    #[test]
    fn determinism_and_empty_keywords() {
        let g = chain(&["a b s c a b s", "b s a c"], &[&["s"], &["s"]], 2);
        let kws = seq(&["q"]);
        let a = g.generate(&kws, 50, 10.0, &mut seed::rng(3)).unwrap();
        let b = g.generate(&kws, 50, 10.0, &mut seed::rng(3)).unwrap();
        assert_eq!(a, b);
        let free = g.generate(&seq(&[]), 200, 10.0, &mut seed::rng(4)).unwrap();
        assert_eq!(free.len(), 200);
        assert!(free.iter().all(|w| ["a", "b", "c"].contains(&w.as_str())));
        assert!(MarkovGenerator::train(&[(vec![], HashSet::new())], 2).is_err());
    }

    fn handle(genre: &str) -> GeneratorHandle {
        let g = chain(&["a b s c a b s"], &[&["s"]], 2);
        GeneratorHandle {
            genre: genre.into(),
            backend: GeneratorBackend::Builtin(std::sync::Arc::new(g)),
            training_docs: vec!["d".into()],
            config: GeneratorConfig::default(),
        }
    }

    #[test]
    fn synthetic_set_balance_and_provenance() {
        let genres: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let gens: BTreeMap<String, GeneratorHandle> = genres.iter().map(|g| (g.clone(), handle(g))).collect();
        let pool = KeywordPool::Shared(
            (0..7)
                .map(|i| KeywordSequence {
                    source_doc: format!("p{i}"),
                    ..seq(&["q", "r"])
                })
                .collect(),
        );
        assert!(build_synthetic_set(&gens, &genres, &pool, 0, 10, 1).unwrap().is_empty());
        let set = build_synthetic_set(&gens, &genres, &pool, 5, 10, 1).unwrap();
        assert_eq!(set.len(), 20);
        for g in &genres {
            assert_eq!(set.iter().filter(|d| &d.genre == g).count(), 5);
        }
        let ids: HashSet<&str> = pool.sources().iter().map(|p| p.source_doc.as_str()).collect();
        assert!(set.iter().all(|d| ids.contains(d.keywords.source_doc.as_str())));
        // a shared source is rendered in every genre
        for i in 0..5 {
            let srcs: HashSet<&str> = set.iter().filter(|d| d.id.ends_with(&format!("{i:05}"))).map(|d| d.keywords.source_doc.as_str()).collect();
            assert_eq!(srcs.len(), 1);
        }
        assert!(set.iter().all(|d| d.text.split(' ').count() == 10));
        assert_eq!(set, build_synthetic_set(&gens, &genres, &pool, 5, 10, 1).unwrap());

        let missing: BTreeMap<String, GeneratorHandle> = gens.iter().take(3).map(|(k, v)| (k.clone(), v.clone())).collect();
        assert!(matches!(build_synthetic_set(&missing, &genres, &pool, 1, 10, 1), Err(Error::Config(_))));
    }

    #[test]
    fn per_genre_pool_keeps_sources_in_genre() {
        let genres: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let gens: BTreeMap<String, GeneratorHandle> = genres.iter().map(|g| (g.clone(), handle(g))).collect();
        let seqs: Vec<KeywordSequence> = ["A-1", "A-2", "B-1"]
            .iter()
            .map(|id| KeywordSequence {
                source_doc: id.to_string(),
                ..seq(&["q"])
            })
            .collect();
        let pool = KeywordPool::per_genre(seqs, |id| Some(id[..1].to_string())).unwrap();
        let set = build_synthetic_set(&gens, &genres, &pool, 6, 10, 2).unwrap();
        assert!(set.iter().all(|d| d.keywords.source_doc.starts_with(&d.genre)));
        let lone = KeywordPool::per_genre(vec![KeywordSequence { source_doc: "A-1".into(), ..seq(&["q"]) }], |id| Some(id[..1].to_string())).unwrap();
        assert!(matches!(build_synthetic_set(&gens, &genres, &lone, 1, 10, 2), Err(Error::Config(_))));
    }

    fn synth(n: usize, genres: &[&str]) -> Vec<SyntheticDocument> {
        (0..n)
            .map(|i| SyntheticDocument {
                id: format!("s{i}"),
                genre: genres[i % genres.len()].to_owned(),
                keywords: seq(&[]),
                text: format!("text {i}"),
                generator: "g".into(),
                seed: 0,
            })
            .collect()
    }

    #[test]
    fn mix_counts_and_identity() {
        let originals: Vec<Document> = (0..12).map(|i| Document::new(format!("o{i:02}"), ["A", "B"][i % 2], "x y")).collect();
        let refs: Vec<&Document> = originals.iter().collect();
        let syn = synth(8, &["A", "B"]);
        let plan = AugmentationPlan {
            n_original: 5,
            n_synthetic: 3,
            mode: AugMode::Adapt,
            keyword_pool: vec![],
        };
        let mixed = mix(&refs, &syn, &plan, 2).unwrap();
        for g in ["A", "B"] {
            assert_eq!(mixed.iter().filter(|d| d.genre == g).count(), 8);
        }
        let ident = AugmentationPlan {
            n_original: 6,
            n_synthetic: 0,
            ..plan.clone()
        };
        let mut ids: Vec<String> = mix(&refs, &syn, &ident, 2).unwrap().into_iter().map(|d| d.id).collect();
        ids.sort();
        let mut orig_ids: Vec<String> = originals.iter().map(|d| d.id.clone()).collect();
        orig_ids.sort();
        assert_eq!(ids, orig_ids);
        let greedy = AugmentationPlan {
            n_synthetic: 5,
            ..plan
        };
        assert!(matches!(mix(&refs, &syn, &greedy, 2), Err(Error::Capacity { .. })));
    }

    #[test]
    fn label_shuffle_is_a_uniform_permutation() {
        let docs = synth(40, &["A", "B", "C", "D"]);
        let once = shuffle_labels(docs.clone(), 3);
        assert_eq!(once, shuffle_labels(docs.clone(), 3));
        let hist = |d: &[SyntheticDocument]| {
            let mut m: BTreeMap<String, usize> = BTreeMap::new();
            for x in d {
                *m.entry(x.genre.clone()).or_default() += 1;
            }
            m
        };
        assert_eq!(hist(&once), hist(&docs));
        assert!(once.iter().zip(&docs).all(|(a, b)| a.text == b.text));
        // expected fraction keeping their label is 10/40 under a uniform
        // permutation of a 4 × 10 multiset
        let trials = 2000;
        let kept: usize = (0..trials)
            .map(|s| shuffle_labels(docs.clone(), s).iter().zip(&docs).filter(|(a, b)| a.genre == b.genre).count())
            .sum();
        let frac = kept as f64 / (trials * 40) as f64;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn builtin_training_uses_topic_keywords_as_slots() {
        let words = ["alpha", "beta", "gamma", "delta", "the"];
        let v = Vocabulary::from_words(words).unwrap();
        let rows = vec![0.4, 0.3, 0.2, 0.05, 0.05];
        let model = TopicModel::new(v, rows, 0.5, 0.01).unwrap();
        let docs: Vec<Document> = vec![Document::new("d1", "A", "the alpha the beta the"), Document::new("d2", "A", "the gamma the")];
        let refs: Vec<&Document> = docs.iter().collect();
        let config = GeneratorConfig {
            slot_keywords: 1,
            ..GeneratorConfig::default()
        };
        let h = train_builtin_generator("A", &refs, &model, None, &config).unwrap();
        let GeneratorBackend::Builtin(chain) = &h.backend else { unreachable!() };
        // alpha (d1's best word) and gamma (d2's) became slots; beta did not
        assert!(!chain.index.contains_key("alpha"));
        assert!(!chain.index.contains_key("gamma"));
        assert!(chain.index.contains_key("beta"));
        assert!(h.id().starts_with("builtin:A:"));
        let wrong = Document::new("d3", "B", "alpha");
        assert!(train_builtin_generator("A", &[&wrong], &model, None, &config).is_err());
        assert!(train_builtin_generator("A", &[], &model, None, &config).is_err());
    }
}
