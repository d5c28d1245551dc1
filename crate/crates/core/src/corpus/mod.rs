//! Labeled documents, text normalization, character windows and vocabularies.

mod jsonl;
mod normalize;
mod vocab;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::error::{Error, Result};

pub use jsonl::{emit, ingest, ingest_with, parse_lines, write_lines};
pub use normalize::{normalize, normalize_with, tokens, NormalizeOptions};
pub use vocab::{build_vocabulary, Vocabulary};

/// Default window width in characters.
pub const DEFAULT_WINDOW: usize = 1000;

/// One labeled text unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub genre: String,
    pub raw_text: String,
    pub norm_text: String,
    /// Fields of the source record other than id/genre/text, kept for
    /// round-tripping.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, genre: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self::with_options(id, genre, raw_text, NormalizeOptions::default())
    }

    pub fn with_options(
        id: impl Into<String>,
        genre: impl Into<String>,
        raw_text: impl Into<String>,
        opts: NormalizeOptions,
    ) -> Self {
        let raw_text = raw_text.into();
        Document {
            id: id.into(),
            genre: genre.into(),
            norm_text: normalize_with(&raw_text, opts),
            raw_text,
            extra: serde_json::Map::new(),
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        tokens(&self.norm_text)
    }

    /// Length of the normalized text in characters.
    pub fn char_len(&self) -> usize {
        self.norm_text.chars().count()
    }
}

/// Contiguous window of at most `width` characters of `doc.norm_text`, with
/// its start offset drawn uniformly over all valid positions.
///
/// Documents no longer than `width` are returned whole.
pub fn sample_window<'a, R: Rng + ?Sized>(doc: &'a Document, width: usize, rng: &mut R) -> &'a str {
    assert!(width >= 1, "window width must be at least 1");
    window_of(&doc.norm_text, width, rng).1
}

/// Like [`sample_window`] but on a bare string; also returns the character
/// offset that was drawn.
pub fn window_of<'a, R: Rng + ?Sized>(text: &'a str, width: usize, rng: &mut R) -> (usize, &'a str) {
    let len = text.chars().count();
    if len <= width {
        return (0, text);
    }
    let start = rng.gen_range(0..=len - width);
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let begin = indices.nth(start).expect("start within text");
    let end = indices.nth(width - 1).expect("end within text");
    (start, &text[begin..end])
}

/// An ordered, non-empty collection of documents with unique ids.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    genres: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Integrity("corpus is empty".into()));
        }
        let mut index = HashMap::with_capacity(documents.len());
        let mut genres = BTreeSet::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::Integrity(format!("document #{i} has an empty id")));
            }
            if doc.genre.is_empty() {
                return Err(Error::Integrity(format!("document {} has an empty genre", doc.id)));
            }
            if index.insert(doc.id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate document id {:?}", doc.id)));
            }
            genres.insert(doc.genre.clone());
        }
        Ok(Corpus {
            documents,
            genres,
            index,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn genres(&self) -> &BTreeSet<String> {
        &self.genres
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Look up a list of ids, failing on the first unknown one.
    pub fn select<'a, I>(&self, ids: I) -> Result<Vec<&Document>>
    where
        I: IntoIterator<Item = &'a String>,
    {
        ids.into_iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::Integrity(format!("unknown document id {id:?}")))
            })
            .collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn doc_of_len(n: usize) -> Document {
        let text: String = (0..n).map(|i| (b'a' + (i % 26) as u8) as char).collect();
        Document::new("d", "g", text)
    }

    #[test]
    fn short_documents_are_returned_whole() {
        let doc = doc_of_len(400);
        let mut rng = seed::rng(1);
        assert_eq!(sample_window(&doc, DEFAULT_WINDOW, &mut rng), doc.norm_text);
    }

    #[test]
    fn exact_width_has_single_offset() {
        let doc = doc_of_len(1000);
        let mut rng = seed::rng(2);
        for _ in 0..20 {
            let (offset, w) = window_of(&doc.norm_text, 1000, &mut rng);
            assert_eq!(offset, 0);
            assert_eq!(w, doc.norm_text);
        }
    }

    #[test]
    fn window_offsets_are_uniform() {
        // 2001 valid offsets binned into 20 cells, chi-square with 19 dof.
        let doc = doc_of_len(3000);
        let mut rng = seed::rng(3);
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let samples = 10_000;
        for _ in 0..samples {
            let (offset, w) = window_of(&doc.norm_text, 1000, &mut rng);
            assert!(offset <= 2000);
            assert_eq!(w.chars().count(), 1000);
            counts[offset * bins / 2001] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = (b * 2001).div_ceil(bins);
            let hi = ((b + 1) * 2001).div_ceil(bins);
            let expected = samples as f64 * (hi - lo) as f64 / 2001.0;
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn windows_respect_multibyte_chars() {
        let doc = Document::new("d", "g", "héllo wörld ñandú ".repeat(20));
        let mut rng = seed::rng(4);
        for _ in 0..200 {
            let w = sample_window(&doc, 17, &mut rng);
            assert_eq!(w.chars().count(), 17);
            assert!(doc.norm_text.contains(w));
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let docs = vec![Document::new("d1", "NEWS", "a"), Document::new("d1", "Review", "b")];
        assert!(matches!(Corpus::new(docs), Err(Error::Integrity(_))));
        assert!(matches!(Corpus::new(vec![]), Err(Error::Integrity(_))));
    }

    proptest::proptest! {
        #[test]
        fn window_is_substring(text in "[a-zé ]{0,300}", width in 1usize..400, s in 0u64..1000) {
            let doc = Document::new("d", "g", text);
            let mut rng = seed::rng(s);
            let w = sample_window(&doc, width, &mut rng);
            proptest::prop_assert!(doc.norm_text.contains(w));
            proptest::prop_assert_eq!(w.chars().count(), width.min(doc.char_len()));
        }
    }
}
