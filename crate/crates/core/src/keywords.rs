//! Topic-weighted keyword extraction.
//!
//! A word's score within a document sums, over each of its occurrences, the
//! topic-weighted word score `Σ_t L(D,t) · L(w,t)`. The `m` best distinct
//! words are kept and every other token is dropped; the survivors, in
//! document order and with repeats, form the keyword sequence that conditions
//! a generator.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::topics::{DocTopicScores, TopicModel};

pub const DEFAULT_KEYWORDS: usize = 10;

/// How many distinct keywords to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "LimitRepr", into = "String")]
pub enum KeywordLimit {
    Top(usize),
    /// Every in-vocabulary word of the document.
    All,
}

impl KeywordLimit {
    pub fn get(self) -> usize {
        match self {
            KeywordLimit::Top(m) => m,
            KeywordLimit::All => usize::MAX,
        }
    }
}

impl std::fmt::Display for KeywordLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeywordLimit::Top(m) => write!(f, "{m}"),
            KeywordLimit::All => f.write_str("all"),
        }
    }
}

/// Accepted serialized forms: a count or a string such as `"10"` or `"all"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum LimitRepr {
    Count(u64),
    Text(String),
}

impl TryFrom<LimitRepr> for KeywordLimit {
    type Error = Error;

    fn try_from(r: LimitRepr) -> Result<Self> {
        match r {
            LimitRepr::Count(m) => m.to_string().parse(),
            LimitRepr::Text(s) => s.parse(),
        }
    }
}

impl From<KeywordLimit> for String {
    fn from(l: KeywordLimit) -> String {
        l.to_string()
    }
}

impl std::str::FromStr for KeywordLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(KeywordLimit::All);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&m| m >= 1)
            .map(KeywordLimit::Top)
            .ok_or_else(|| Error::Config(format!("keyword count must be a positive integer or \"all\", got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSequence {
    #[serde(rename = "doc_id")]
    pub source_doc: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub distinct_count: usize,
}

impl KeywordSequence {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct keywords with their number of occurrences, first-seen order.
    pub fn multiplicities(&self) -> Vec<(&str, usize)> {
        let mut order: Vec<(&str, usize)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for t in &self.tokens {
            match pos.get(t.as_str()) {
                Some(&i) => order[i].1 += 1,
                None => {
                    pos.insert(t, order.len());
                    order.push((t, 1));
                }
            }
        }
        order
    }

    /// An empty sequence, for unconditioned generation.
    pub fn empty(source_doc: impl Into<String>) -> Self {
        KeywordSequence {
            source_doc: source_doc.into(),
            tokens: Vec::new(),
            distinct_count: 0,
        }
    }
}

/// Topic-weighted relevance of `word` to the document: the per-occurrence
/// word score summed over occurrences. Out-of-vocabulary words score 0.
pub fn score_word(word: &str, doc: &Document, theta: &DocTopicScores, model: &TopicModel) -> f64 {
    let Some(w) = model.vocabulary().index_of(word) else {
        return 0.0;
    };
    let count = doc.tokens().filter(|t| *t == word).count();
    count as f64 * occurrence_score(w, theta, model)
}

/// `Σ_t θ_t · L(w, t)` for one occurrence of word index `w`.
pub fn occurrence_score(w: usize, theta: &DocTopicScores, model: &TopicModel) -> f64 {
    theta
        .theta
        .iter()
        .enumerate()
        .map(|(t, &th)| th * model.score(w, t))
        .sum()
}

/// Keep the `limit` best distinct words (ties by vocabulary index) and return
/// their occurrences in document order.
pub fn extract_keywords(
    doc: &Document,
    model: &TopicModel,
    theta: &DocTopicScores,
    limit: KeywordLimit,
) -> Result<KeywordSequence> {
    if theta.k() != model.k() {
        return Err(Error::Shape(format!(
            "theta has {} topics, model has {}",
            theta.k(),
            model.k()
        )));
    }
    let vocab = model.vocabulary();
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for tok in doc.tokens() {
        if let Some(w) = vocab.index_of(tok) {
            *counts.entry(w).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    let mut scored: Vec<(f64, usize)> = counts
        .iter()
        .map(|(&w, &c)| (c as f64 * occurrence_score(w, theta, model), w))
        .collect();
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(limit.get());
    let keep: std::collections::HashSet<usize> = scored.iter().map(|&(_, w)| w).collect();
    let tokens: Vec<String> = doc
        .tokens()
        .filter(|t| vocab.index_of(t).is_some_and(|w| keep.contains(&w)))
        .map(str::to_owned)
        .collect();
    Ok(KeywordSequence {
        source_doc: doc.id.clone(),
        distinct_count: keep.len(),
        tokens,
    })
}

/// Keyword file: one `{"doc_id": .., "tokens": [..]}` object per line.
pub fn write_keyword_file(path: &Path, sequences: &[KeywordSequence]) -> Result<()> {
    let mut out = Vec::new();
    for s in sequences {
        let line = serde_json::json!({"doc_id": s.source_doc, "tokens": s.tokens});
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    fsutil::write_atomic(path, &out)
}

pub fn read_keyword_file(path: &Path) -> Result<Vec<KeywordSequence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut s: KeywordSequence = serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            s.distinct_count = s.multiplicities().len();
            Ok(s)
        })
        .collect()
}
