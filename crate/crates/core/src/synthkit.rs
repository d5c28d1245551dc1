//! Planted corpora with known topic and genre structure.
//!
//! A planted document mixes four kinds of tokens:
//!
//! * common function words shared by every genre,
//! * genre style words: a small per-genre set of function words, disjoint
//!   across genres (the non-topical signal a genre classifier should learn);
//!   a style token comes from the genre's own set with probability
//!   `style_purity` and from any genre's set otherwise, so each genre has its
//!   own function-word frequencies,
//! * genre markers: genre-specific content words that carry no topic; they
//!   survive the stoplist, so a document's full keyword sequence reveals its
//!   genre while its few top topical keywords do not,
//! * content words from the document's primary topic and from one secondary
//!   topic.
//!
//! Topics live on a ring: each owns a block of words and shares a "bridge"
//! block with each neighbour. With probability `bias` a document's primary
//! topic is drawn from its genre's preferred topics, otherwise uniformly from
//! all topics, so `bias = 0` makes topic independent of genre.
//!
//! The defaults keep common and style words at the head of the frequency
//! ranking, so the 44 most frequent words are exactly the function words and a
//! frequency stoplist of that size removes them from the topic vocabulary.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, Document};
use crate::error::{Error, Result};
use crate::{fsutil, seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub genres: usize,
    pub topics: usize,
    pub vocab_size: usize,
    pub docs_per_genre: usize,
    pub doc_length: usize,
    /// Probability that a document's primary topic comes from its genre's
    /// preferred subset.
    pub bias: f64,
    pub seed: u64,

    /// Number of preferred topics per genre.
    pub preferred_per_genre: usize,
    pub common_words: usize,
    pub style_words_per_genre: usize,
    pub marker_words_per_genre: usize,
    /// Token shares; the remainder is topical content.
    pub common_share: f64,
    pub style_share: f64,
    /// Probability that a style token comes from the genre's own set; the
    /// rest is drawn from the sets of all genres alike.
    pub style_purity: f64,
    pub marker_share: f64,
    /// Share of content tokens taken from the secondary topic.
    pub secondary_share: f64,
    /// Probability mass of a topic on its two bridge blocks.
    pub bridge_mass: f64,
    /// Fraction of the topical vocabulary used for bridge blocks.
    pub bridge_fraction: f64,
    /// Zipf exponent for word frequencies inside topic and marker blocks.
    pub zipf_exponent: f64,
    /// Zipf exponent inside common and style blocks; flatter than topical
    /// words so function words dominate the frequency head.
    pub function_zipf_exponent: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            genres: 4,
            topics: 6,
            vocab_size: 2000,
            docs_per_genre: 400,
            doc_length: 300,
            bias: 0.9,
            seed: 0,
            preferred_per_genre: 2,
            common_words: 20,
            style_words_per_genre: 6,
            marker_words_per_genre: 8,
            common_share: 0.25,
            style_share: 0.2,
            style_purity: 0.15,
            marker_share: 0.02,
            secondary_share: 0.4,
            bridge_mass: 0.35,
            bridge_fraction: 0.3,
            zipf_exponent: 0.7,
            function_zipf_exponent: 0.5,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.bias) {
            return fail(format!("bias must be in [0, 1], got {}", self.bias));
        }
        if self.topics < 2 || self.genres < 2 {
            return fail("planted corpora need at least 2 topics and 2 genres".into());
        }
        if self.docs_per_genre == 0 || self.doc_length == 0 {
            return fail("docs_per_genre and doc_length must be positive".into());
        }
        if self.preferred_per_genre == 0 || self.preferred_per_genre > self.topics {
            return fail("preferred_per_genre must be in 1..=topics".into());
        }
        let shares = self.common_share + self.style_share + self.marker_share;
        if [self.common_share, self.style_share, self.style_purity, self.marker_share, self.secondary_share, self.bridge_mass, self.bridge_fraction]
            .iter()
            .any(|s| !(0.0..=1.0).contains(s))
            || shares > 1.0
        {
            return fail("token shares must lie in [0, 1] and sum to at most 1".into());
        }
        let reserved = self.common_words + self.genres * (self.style_words_per_genre + self.marker_words_per_genre);
        if self.vocab_size < reserved + 2 * self.topics {
            return fail(format!(
                "vocab_size {} too small: {reserved} words reserved for function words and markers",
                self.vocab_size
            ));
        }
        Ok(())
    }

    pub fn genre_name(&self, g: usize) -> String {
        format!("G{g}")
    }

    /// Topics preferred by genre `g`: `g, g + G, g + 2G, ...` modulo K, until
    /// `preferred_per_genre` distinct topics are collected.
    pub fn preferred_topics(&self, g: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut t = g % self.topics;
        while out.len() < self.preferred_per_genre {
            if !out.contains(&t) {
                out.push(t);
            }
            t = (t + self.genres) % self.topics;
            if out.len() < self.preferred_per_genre && out.contains(&t) {
                // cycle exhausted: fill with the next unused topics
                t = (0..self.topics).find(|x| !out.contains(x)).unwrap_or(t);
            }
        }
        out
    }
}

/// Ground truth recorded for one planted document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDoc {
    pub id: String,
    pub genre: String,
    pub topic: usize,
    pub secondary_topic: usize,
}

/// Planted truth sidecar: per-document assignments and the word distributions
/// used to generate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub docs: Vec<PlantedDoc>,
    /// Per topic, (word, probability) in descending probability.
    pub topic_words: Vec<Vec<(String, f64)>>,
    pub style_words: BTreeMap<String, Vec<String>>,
    pub marker_words: BTreeMap<String, Vec<String>>,
    pub common_words: Vec<String>,
    pub preferred_topics: BTreeMap<String, Vec<usize>>,
}

impl PlantedTruth {
    /// The `k` most probable planted words of a topic.
    pub fn top_topic_words(&self, t: usize, k: usize) -> Vec<&str> {
        self.topic_words[t].iter().take(k).map(|(w, _)| w.as_str()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_json_atomic(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        fsutil::read_json(path)
    }

    /// genre × topic contingency table of primary topics.
    pub fn contingency(&self, genres: &[String], topics: usize) -> Vec<Vec<usize>> {
        let mut table = vec![vec![0; topics]; genres.len()];
        for d in &self.docs {
            let g = genres.iter().position(|x| *x == d.genre).expect("known genre");
            table[g][d.topic] += 1;
        }
        table
    }
}

/// Deterministic pronounceable word for an index; distinct indices give
/// distinct words.
pub fn planted_word(index: usize) -> String {
    const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let base = ONSETS.len() * VOWELS.len();
    let mut n = index;
    let mut word = String::new();
    // at least two syllables; the leading syllable count is implied by length
    loop {
        let s = n % base;
        word.push_str(ONSETS[s / VOWELS.len()]);
        word.push_str(VOWELS[s % VOWELS.len()]);
        n /= base;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    if word.len() < 4 {
        word.push('x');
    }
    word
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n).map(|r| 1.0 / (r as f64).powf(exponent)).collect()
}

struct Block {
    words: Vec<String>,
    sampler: WeightedIndex<f64>,
}

impl Block {
    fn new(words: Vec<String>, exponent: f64) -> Self {
        let sampler = WeightedIndex::new(zipf_weights(words.len(), exponent)).expect("non-empty block");
        Block { words, sampler }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        &self.words[self.sampler.sample(rng)]
    }
}

struct TopicSampler {
    own: Block,
    left: Block,
    right: Block,
    bridge_mass: f64,
}

impl TopicSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        let u: f64 = rng.gen();
        if u < self.bridge_mass / 2.0 {
            self.left.sample(rng)
        } else if u < self.bridge_mass {
            self.right.sample(rng)
        } else {
            self.own.sample(rng)
        }
    }

    fn distribution(&self, exponent: f64) -> Vec<(String, f64)> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for (block, mass) in [
            (&self.own, 1.0 - self.bridge_mass),
            (&self.left, self.bridge_mass / 2.0),
            (&self.right, self.bridge_mass / 2.0),
        ] {
            let w = zipf_weights(block.words.len(), exponent);
            let s: f64 = w.iter().sum();
            for (word, x) in block.words.iter().zip(w) {
                *out.entry(word.clone()).or_default() += mass * x / s;
            }
        }
        let mut v: Vec<(String, f64)> = out.into_iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

/// Generate a planted corpus. Document ids are `g{genre}-{n:04}`, genres are
/// interleaved in file order.
pub fn make_biased_corpus(spec: &PlantedSpec) -> Result<(Corpus, PlantedTruth)> {
    spec.validate()?;
    let mut next = 0usize;
    let mut take = |n: usize| -> Vec<String> {
        let words = (next..next + n).map(planted_word).collect();
        next += n;
        words
    };
    let common = take(spec.common_words);
    let style: Vec<Vec<String>> = (0..spec.genres).map(|_| take(spec.style_words_per_genre)).collect();
    let markers: Vec<Vec<String>> = (0..spec.genres).map(|_| take(spec.marker_words_per_genre)).collect();
    let reserved = spec.common_words + spec.genres * (spec.style_words_per_genre + spec.marker_words_per_genre);
    let topical = spec.vocab_size - reserved;
    let bridge_each = ((topical as f64 * spec.bridge_fraction) / spec.topics as f64).floor().max(1.0) as usize;
    let own_each = (topical - bridge_each * spec.topics) / spec.topics;
    if own_each == 0 {
        return Err(Error::Config("no room for topic-specific words".into()));
    }
    let own: Vec<Vec<String>> = (0..spec.topics).map(|_| take(own_each)).collect();
    // bridge[t] is shared by topics t and t + 1
    let bridges: Vec<Vec<String>> = (0..spec.topics).map(|_| take(bridge_each)).collect();

    let ex = spec.zipf_exponent;
    let topic_samplers: Vec<TopicSampler> = (0..spec.topics)
        .map(|t| TopicSampler {
            own: Block::new(own[t].clone(), ex),
            left: Block::new(bridges[(t + spec.topics - 1) % spec.topics].clone(), ex),
            right: Block::new(bridges[t].clone(), ex),
            bridge_mass: spec.bridge_mass,
        })
        .collect();
    let fx = spec.function_zipf_exponent;
    let common_block = (!common.is_empty()).then(|| Block::new(common.clone(), fx));
    let style_blocks: Vec<Option<Block>> = style
        .iter()
        .map(|w| (!w.is_empty()).then(|| Block::new(w.clone(), fx)))
        .collect();
    let marker_blocks: Vec<Option<Block>> = markers
        .iter()
        .map(|w| (!w.is_empty()).then(|| Block::new(w.clone(), ex)))
        .collect();

    let mut rng = seed::rng(seed::derive(spec.seed, &[&"planted-corpus"]));
    let mut docs = Vec::with_capacity(spec.genres * spec.docs_per_genre);
    let mut truth_docs = Vec::with_capacity(docs.capacity());
    let preferred: Vec<Vec<usize>> = (0..spec.genres).map(|g| spec.preferred_topics(g)).collect();
    for n in 0..spec.docs_per_genre {
        for g in 0..spec.genres {
            let topic = if rng.gen::<f64>() < spec.bias {
                preferred[g][rng.gen_range(0..preferred[g].len())]
            } else {
                rng.gen_range(0..spec.topics)
            };
            let secondary = {
                let s = rng.gen_range(0..spec.topics - 1);
                if s >= topic {
                    s + 1
                } else {
                    s
                }
            };
            let mut words: Vec<&str> = Vec::with_capacity(spec.doc_length);
            for _ in 0..spec.doc_length {
                let u: f64 = rng.gen();
                let c1 = spec.common_share;
                let c2 = c1 + spec.style_share;
                let c3 = c2 + spec.marker_share;
                let sg = if u >= c1 && u < c2 && rng.gen::<f64>() >= spec.style_purity {
                    rng.gen_range(0..spec.genres)
                } else {
                    g
                };
                let word = match (&common_block, &style_blocks[sg], &marker_blocks[g]) {
                    (Some(b), _, _) if u < c1 => b.sample(&mut rng),
                    (_, Some(b), _) if (c1..c2).contains(&u) => b.sample(&mut rng),
                    (_, _, Some(b)) if (c2..c3).contains(&u) => b.sample(&mut rng),
                    _ => {
                        let t = if rng.gen::<f64>() < spec.secondary_share {
                            secondary
                        } else {
                            topic
                        };
                        topic_samplers[t].sample(&mut rng)
                    }
                };
                words.push(word);
            }
            let id = format!("g{g}-{n:04}");
            let genre = spec.genre_name(g);
            docs.push(Document::new(id.clone(), genre.clone(), words.join(" ")));
            truth_docs.push(PlantedDoc {
                id,
                genre,
                topic,
                secondary_topic: secondary,
            });
        }
    }
    let truth = PlantedTruth {
        docs: truth_docs,
        topic_words: topic_samplers.iter().map(|s| s.distribution(ex)).collect(),
        style_words: (0..spec.genres).map(|g| (spec.genre_name(g), style[g].clone())).collect(),
        marker_words: (0..spec.genres).map(|g| (spec.genre_name(g), markers[g].clone())).collect(),
        common_words: common,
        preferred_topics: (0..spec.genres).map(|g| (spec.genre_name(g), preferred[g].clone())).collect(),
    };
    Ok((Corpus::new(docs)?, truth))
}

/// Write the corpus in the standard line format plus a `*.truth.json` sidecar.
pub fn write_planted(corpus: &Corpus, truth: &PlantedTruth, path: &Path) -> Result<std::path::PathBuf> {
    corpus::emit(corpus.iter(), path)?;
    let sidecar = sidecar_path(path);
    truth.save(&sidecar)?;
    Ok(sidecar)
}

pub fn sidecar_path(corpus_path: &Path) -> std::path::PathBuf {
    let stem = corpus_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    corpus_path.with_file_name(format!("{stem}.truth.json"))
}

/// Two topics over disjoint word sets, one topic per document; the LDA
/// recovery benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoTopicSpec {
    pub docs: usize,
    pub doc_length: usize,
    pub words_per_topic: usize,
    /// The first `core_words` of each topic are `core_weight` times as likely
    /// as the rest, so each topic has a well-defined top list.
    pub core_words: usize,
    pub core_weight: f64,
    pub seed: u64,
}

impl Default for TwoTopicSpec {
    fn default() -> Self {
        TwoTopicSpec {
            docs: 200,
            doc_length: 50,
            words_per_topic: 20,
            core_words: 10,
            core_weight: 3.0,
            seed: 0,
        }
    }
}

/// Returns the corpus and, per topic, its word set ordered core-first.
pub fn two_topic_corpus(spec: &TwoTopicSpec) -> (Corpus, Vec<Vec<String>>) {
    let sets: Vec<Vec<String>> = (0..2)
        .map(|t| {
            (0..spec.words_per_topic)
                .map(|i| planted_word(1000 + t * spec.words_per_topic + i))
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..spec.words_per_topic)
        .map(|i| if i < spec.core_words { spec.core_weight } else { 1.0 })
        .collect();
    let sampler = WeightedIndex::new(&weights).expect("positive weights");
    let mut rng = seed::rng(seed::derive(spec.seed, &[&"two-topic"]));
    let docs = (0..spec.docs)
        .map(|d| {
            let t = d % 2;
            let text = (0..spec.doc_length)
                .map(|_| sets[t][sampler.sample(&mut rng)].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Document::new(format!("t{t}-{d:04}"), format!("T{t}"), text)
        })
        .collect();
    (Corpus::new(docs).expect("unique ids"), sets)
}

/// Match every learned topic to the planted set it overlaps most and return
/// the Jaccard index of each learned top list with its match's top list.
pub fn majority_jaccard(learned: &[Vec<&str>], planted: &[Vec<&str>]) -> Vec<f64> {
    use std::collections::HashSet;
    learned
        .iter()
        .map(|l| {
            let ls: HashSet<&str> = l.iter().copied().collect();
            planted
                .iter()
                .map(|p| {
                    let ps: HashSet<&str> = p.iter().copied().collect();
                    let inter = ls.intersection(&ps).count();
                    let union = ls.union(&ps).count();
                    (inter, inter as f64 / union.max(1) as f64)
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
                .map_or(0.0, |(_, j)| j)
        })
        .collect()
}
