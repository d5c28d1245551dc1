use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Dense word index with corpus frequencies and a stoplist of excluded words.
///
/// Indices are assigned by descending corpus frequency, ties broken
/// lexicographically, so index order doubles as the global tie-break order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    freq: Vec<u64>,
    stoplist: BTreeSet<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    freq: Vec<u64>,
    stoplist: BTreeSet<String>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.words, r.freq, r.stoplist)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            words: v.words,
            freq: v.freq,
            stoplist: v.stoplist,
        }
    }
}

impl Vocabulary {
    pub fn from_parts(words: Vec<String>, freq: Vec<u64>, stoplist: BTreeSet<String>) -> Result<Self> {
        if words.len() != freq.len() {
            return Err(Error::Shape(format!(
                "vocabulary has {} words but {} frequencies",
                words.len(),
                freq.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate vocabulary word {w:?}")));
            }
            if stoplist.contains(w) {
                return Err(Error::Integrity(format!("word {w:?} is both indexed and stoplisted")));
            }
        }
        Ok(Vocabulary {
            words,
            freq,
            stoplist,
            index,
        })
    }

    /// Vocabulary over `words` in the given order, all frequencies zero.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        let freq = vec![0; words.len()];
        Self::from_parts(words, freq, BTreeSet::new())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn frequency(&self, index: usize) -> u64 {
        self.freq[index]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    pub fn stoplist(&self) -> &BTreeSet<String> {
        &self.stoplist
    }

    /// In-vocabulary token indices of a normalized text, in order.
    pub fn encode(&self, norm_text: &str) -> Vec<usize> {
        norm_text
            .split_whitespace()
            .filter_map(|t| self.index_of(t))
            .collect()
    }

    /// Stable content hash over the indexed words in index order.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for w in &self.words {
            bytes.extend_from_slice(w.as_bytes());
            bytes.push(b'\n');
        }
        crate::fsutil::sha256_hex(&bytes)
    }
}

/// Index every word with corpus frequency ≥ `min_count`, after removing the
/// `stop_top_n` most frequent words into the stoplist.
pub fn build_vocabulary(corpus: &Corpus, min_count: u64, stop_top_n: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in corpus {
        for tok in doc.tokens() {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let stoplist: BTreeSet<String> = ranked.iter().take(stop_top_n).map(|(w, _)| (*w).to_owned()).collect();
    let (words, freq): (Vec<String>, Vec<u64>) = ranked
        .into_iter()
        .skip(stop_top_n)
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_owned(), c))
        .unzip();
    if words.is_empty() {
        return Err(Error::Config(format!(
            "vocabulary is empty (min_count = {min_count}, stop_top_n = {stop_top_n})"
        )));
    }
    Vocabulary::from_parts(words, freq, stoplist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use rand::Rng;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), "g", *t))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn counts_words() {
        let v = build_vocabulary(&corpus(&["a a b", "a c"]), 1, 0).unwrap();
        assert_eq!(v.words(), ["a", "b", "c"]);
        assert_eq!(v.frequencies(), [3, 1, 1]);
        assert!(v.stoplist().is_empty());
    }

    #[test]
    fn stoplist_removes_most_frequent() {
        let v = build_vocabulary(&corpus(&["a a b", "a c"]), 1, 1).unwrap();
        assert_eq!(v.words(), ["b", "c"]);
        assert_eq!(v.stoplist().iter().collect::<Vec<_>>(), ["a"]);
        assert_eq!(v.index_of("a"), None);
    }

    #[test]
    fn min_count_filters() {
        let v = build_vocabulary(&corpus(&["a a b", "a c"]), 2, 0).unwrap();
        assert_eq!(v.words(), ["a"]);
        assert!(matches!(build_vocabulary(&corpus(&["a a b", "a c"]), 4, 0), Err(Error::Config(_))));
        assert!(matches!(build_vocabulary(&corpus(&["a"]), 1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn frequencies_match_hash_count() {
        let mut rng = crate::seed::rng(9);
        let alphabet = ["x", "y", "z", "w", "v", "u", "t"];
        let texts: Vec<String> = (0..50)
            .map(|_| {
                (0..rng.gen_range(1..30))
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let v = build_vocabulary(&corpus(&refs), 1, 0).unwrap();
        let mut oracle: HashMap<String, u64> = HashMap::new();
        for t in &texts {
            for w in t.split(' ') {
                *oracle.entry(w.to_owned()).or_default() += 1;
            }
        }
        assert_eq!(v.len(), oracle.len());
        for (w, c) in &oracle {
            assert_eq!(v.frequency(v.index_of(w).unwrap()), *c, "{w}");
        }
        for pair in v.frequencies().windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let v = build_vocabulary(&corpus(&["a a b", "a c"]), 1, 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"words":["a","a"],"freq":[1,1],"stoplist":[]}"#;
        assert!(serde_json::from_str::<Vocabulary>(bad).is_err());
    }
}
