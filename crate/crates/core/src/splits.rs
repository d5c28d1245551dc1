//! Transfer-assessment datasets for one (topic, N) cell.
//!
//! For a topic `t`, every genre's scorable documents are ranked by `L(D, t)`.
//! The top of the ranking supplies the on-topic test set, then the on-topic
//! training set and an on-topic validation set; the bottom supplies the
//! off-topic training set and then the off-topic validation set. Ties are
//! broken by document id, ascending, at both ends.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::seed;
use crate::topics::{infer_tokens, DocTopicScores, TopicModel};

/// Documents per genre in the validation and test sets by default.
pub const DEFAULT_HELDOUT: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub topic: usize,
    /// Training documents per genre (N).
    pub n_train: usize,
    /// Off-topic validation documents per genre.
    pub n_val: usize,
    /// On-topic test documents per genre.
    pub n_test: usize,
    /// On-topic validation documents per genre, used only by the on-topic
    /// ceiling condition; 0 disables the partition.
    pub n_on_val: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(topic: usize, n_train: usize) -> Self {
        SplitSpec {
            topic,
            n_train,
            n_val: DEFAULT_HELDOUT,
            n_test: DEFAULT_HELDOUT,
            n_on_val: DEFAULT_HELDOUT,
            seed: 0,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Config("split counts must be at least 1".into()));
        }
        if self.topic >= k {
            return Err(Error::Index { index: self.topic, len: k });
        }
        Ok(())
    }

    /// Documents each genre must contribute.
    pub fn required_per_genre(&self) -> usize {
        self.n_test + self.n_train + self.n_on_val + self.n_train + self.n_val
    }
}

/// Per-document topic scores for a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub scores: BTreeMap<String, DocTopicScores>,
    /// Documents without any in-vocabulary token.
    pub unscorable: Vec<String>,
    pub model_hash: String,
}

/// Seed used for a document's fold-in inference under `score_corpus(seed)`.
pub fn document_seed(seed: u64, doc_id: &str) -> u64 {
    seed::derive(seed, &[&"fold-in", &doc_id])
}

/// Fold-in topic scores for every document.
pub fn score_corpus(corpus: &Corpus, model: &TopicModel, fold_in_sweeps: usize, seed: u64) -> Result<CorpusScores> {
    let mut scores = BTreeMap::new();
    let mut unscorable = Vec::new();
    for doc in corpus {
        let toks = model.vocabulary().encode(&doc.norm_text);
        if toks.is_empty() {
            unscorable.push(doc.id.clone());
            continue;
        }
        let theta = infer_tokens(model, &toks, fold_in_sweeps, document_seed(seed, &doc.id));
        scores.insert(doc.id.clone(), theta);
    }
    if scores.is_empty() {
        return Err(Error::Config("no document could be scored against the topic model".into()));
    }
    Ok(CorpusScores {
        scores,
        unscorable,
        model_hash: model.content_hash(),
    })
}

/// Genre → document ids.
pub type Partition = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSplit {
    pub spec: SplitSpec,
    pub model_hash: String,
    pub on_test: Partition,
    pub on_train: Partition,
    pub on_val: Partition,
    pub off_train: Partition,
    pub off_val: Partition,
}

pub const PARTITIONS: [&str; 5] = ["on_test", "on_train", "on_val", "off_train", "off_val"];

impl TransferSplit {
    pub fn partition(&self, name: &str) -> Option<&Partition> {
        match name {
            "on_test" => Some(&self.on_test),
            "on_train" => Some(&self.on_train),
            "on_val" => Some(&self.on_val),
            "off_train" => Some(&self.off_train),
            "off_val" => Some(&self.off_val),
            _ => None,
        }
    }

    pub fn genres(&self) -> impl Iterator<Item = &String> {
        self.on_test.keys()
    }

    /// All ids of a partition, genres in order.
    pub fn ids(partition: &Partition) -> impl Iterator<Item = &String> {
        partition.values().flatten()
    }

    /// Check pairwise disjointness and per-genre balance.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for name in PARTITIONS {
            let part = self.partition(name).expect("known partition");
            let expected = match name {
                "on_test" => self.spec.n_test,
                "on_train" | "off_train" => self.spec.n_train,
                "on_val" => self.spec.n_on_val,
                _ => self.spec.n_val,
            };
            for (genre, ids) in part {
                if ids.len() != expected {
                    return Err(Error::Integrity(format!(
                        "{name}/{genre} has {} documents, expected {expected}",
                        ids.len()
                    )));
                }
                for id in ids {
                    if !seen.insert(id.as_str()) {
                        return Err(Error::Integrity(format!("document {id} appears in two partitions")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Build the on/off-topic partitions for `spec.topic`.
pub fn build_transfer_split(corpus: &Corpus, scores: &CorpusScores, spec: &SplitSpec) -> Result<TransferSplit> {
    let k = scores
        .scores
        .values()
        .next()
        .map(DocTopicScores::k)
        .ok_or_else(|| Error::Config("empty score table".into()))?;
    spec.validate(k)?;

    let mut by_genre: BTreeMap<&str, Vec<(f64, &str)>> = corpus.genres().iter().map(|g| (g.as_str(), Vec::new())).collect();
    for doc in corpus {
        if let Some(s) = scores.scores.get(&doc.id) {
            by_genre
                .get_mut(doc.genre.as_str())
                .expect("corpus genre")
                .push((s.theta[spec.topic], &doc.id));
        }
    }

    let mut split = TransferSplit {
        spec: spec.clone(),
        model_hash: scores.model_hash.clone(),
        on_test: Partition::new(),
        on_train: Partition::new(),
        on_val: Partition::new(),
        off_train: Partition::new(),
        off_val: Partition::new(),
    };
    let needed = spec.required_per_genre();
    for (genre, mut docs) in by_genre {
        if docs.len() < needed {
            return Err(Error::Capacity {
                genre: genre.to_owned(),
                needed,
                available: docs.len(),
            });
        }
        docs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let mut top = docs.iter().map(|&(_, id)| id.to_owned());
        let on_test: Vec<String> = top.by_ref().take(spec.n_test).collect();
        let on_train: Vec<String> = top.by_ref().take(spec.n_train).collect();
        let on_val: Vec<String> = top.by_ref().take(spec.n_on_val).collect();
        let taken: BTreeSet<&str> = on_test.iter().chain(&on_train).chain(&on_val).map(String::as_str).collect();

        docs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let mut bottom = docs.iter().map(|&(_, id)| id).filter(|id| !taken.contains(id)).map(str::to_owned);
        let off_train: Vec<String> = bottom.by_ref().take(spec.n_train).collect();
        let off_val: Vec<String> = bottom.by_ref().take(spec.n_val).collect();

        let g = genre.to_owned();
        split.on_test.insert(g.clone(), on_test);
        split.on_train.insert(g.clone(), on_train);
        split.on_val.insert(g.clone(), on_val);
        split.off_train.insert(g.clone(), off_train);
        split.off_val.insert(g, off_val);
    }
    split.validate()?;
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub spec: SplitSpec,
    pub seed: u64,
    pub model_hash: String,
    /// Partition → genre → count.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// Partition → file name relative to the manifest.
    pub files: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Write one corpus-format file per partition plus `manifest.json` into `dir`.
pub fn emit_split(split: &TransferSplit, corpus: &Corpus, dir: &Path) -> Result<SplitManifest> {
    split.validate()?;
    let mut counts = BTreeMap::new();
    let mut files = BTreeMap::new();
    for name in PARTITIONS {
        let part = split.partition(name).expect("known partition");
        let docs = corpus.select(TransferSplit::ids(part))?;
        let file = format!("{name}.jsonl");
        corpus::emit(docs.into_iter(), &dir.join(&file))?;
        counts.insert(name.to_owned(), part.iter().map(|(g, ids)| (g.clone(), ids.len())).collect());
        files.insert(name.to_owned(), file);
    }
    let manifest = SplitManifest {
        spec: split.spec.clone(),
        seed: split.spec.seed,
        model_hash: split.model_hash.clone(),
        counts,
        files,
    };
    fsutil::write_json_atomic(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Read back a split written by [`emit_split`].
pub fn read_split(dir: &Path) -> Result<(TransferSplit, SplitManifest)> {
    let manifest: SplitManifest = fsutil::read_json(&dir.join(MANIFEST_FILE))?;
    let mut parts: BTreeMap<String, Partition> = BTreeMap::new();
    for name in PARTITIONS {
        let file = manifest
            .files
            .get(name)
            .ok_or_else(|| Error::Integrity(format!("manifest lists no file for {name}")))?;
        let path: PathBuf = dir.join(file);
        let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let docs = corpus::parse_lines(&text[..], &path, corpus::NormalizeOptions::default())?;
        let mut part = Partition::new();
        for g in manifest.counts.get(name).into_iter().flat_map(|c| c.keys()) {
            part.insert(g.clone(), Vec::new());
        }
        for d in docs {
            part.entry(d.genre).or_default().push(d.id);
        }
        parts.insert(name.to_owned(), part);
    }
    let mut take = |n: &str| parts.remove(n).unwrap_or_default();
    let split = TransferSplit {
        spec: manifest.spec.clone(),
        model_hash: manifest.model_hash.clone(),
        on_test: take("on_test"),
        on_train: take("on_train"),
        on_val: take("on_val"),
        off_train: take("off_train"),
        off_val: take("off_val"),
    };
    split.validate()?;
    Ok((split, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use rand::Rng;

    fn scored(entries: &[(&str, &str, f64)]) -> (Corpus, CorpusScores) {
        let corpus = Corpus::new(entries.iter().map(|(id, g, _)| Document::new(*id, *g, "x")).collect()).unwrap();
        let scores = entries
            .iter()
            .map(|(id, _, s)| (id.to_string(), DocTopicScores { theta: vec![*s, 1.0 - *s] }))
            .collect();
        (
            corpus,
            CorpusScores {
                scores,
                unscorable: vec![],
                model_hash: "m".into(),
            },
        )
    }

    fn tiny_spec() -> SplitSpec {
        SplitSpec {
            topic: 0,
            n_train: 1,
            n_val: 1,
            n_test: 1,
            n_on_val: 1,
            seed: 0,
        }
    }

    #[test]
    fn exact_capacity_forces_assignment() {
        let (c, s) = scored(&[("a", "G", 0.9), ("b", "G", 0.7), ("c", "G", 0.5), ("d", "G", 0.1), ("e", "G", 0.3)]);
        let split = build_transfer_split(&c, &s, &tiny_spec()).unwrap();
        assert_eq!(split.on_test["G"], ["a"]);
        assert_eq!(split.on_train["G"], ["b"]);
        assert_eq!(split.on_val["G"], ["c"]);
        assert_eq!(split.off_train["G"], ["d"]);
        assert_eq!(split.off_val["G"], ["e"]);
    }

    #[test]
    fn equal_scores_fall_back_to_id_order() {
        let (c, s) = scored(&[("e", "G", 0.5), ("c", "G", 0.5), ("a", "G", 0.5), ("d", "G", 0.5), ("b", "G", 0.5)]);
        let split = build_transfer_split(&c, &s, &tiny_spec()).unwrap();
        assert_eq!(split.on_test["G"], ["a"]);
        assert_eq!(split.on_train["G"], ["b"]);
        assert_eq!(split.on_val["G"], ["c"]);
        assert_eq!(split.off_train["G"], ["d"]);
        assert_eq!(split.off_val["G"], ["e"]);
    }

    #[test]
    fn capacity_error_names_genre_and_shortfall() {
        let (c, s) = scored(&[("a", "G", 0.9), ("b", "G", 0.7), ("c", "H", 0.5), ("d", "H", 0.1), ("e", "H", 0.3), ("f", "H", 0.2), ("g", "H", 0.2)]);
        match build_transfer_split(&c, &s, &tiny_spec()) {
            Err(e @ Error::Capacity { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("genre G") && msg.contains("short by 3"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn topic_out_of_range() {
        let (c, s) = scored(&[("a", "G", 0.9)]);
        let spec = SplitSpec { topic: 2, ..tiny_spec() };
        assert!(matches!(build_transfer_split(&c, &s, &spec), Err(Error::Index { .. })));
    }

    fn random_case(rng: &mut crate::seed::Rng) -> (Corpus, CorpusScores, SplitSpec) {
        let genres = ["A", "B", "C"];
        let n = 500;
        let entries: Vec<(String, String, f64)> = (0..n)
            .map(|i| {
                (
                    format!("doc{:03}", rng.gen_range(0..1000) * 1000 + i),
                    genres[rng.gen_range(0..3)].to_owned(),
                    // coarse scores so ties matter
                    rng.gen_range(0..20) as f64 / 20.0,
                )
            })
            .collect();
        let refs: Vec<(&str, &str, f64)> = entries.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), *c)).collect();
        let (c, s) = scored(&refs);
        let spec = SplitSpec {
            topic: rng.gen_range(0..2),
            n_train: rng.gen_range(1..30),
            n_val: rng.gen_range(1..30),
            n_test: rng.gen_range(1..30),
            n_on_val: rng.gen_range(0..20),
            seed: 0,
        };
        (c, s, spec)
    }

    /// Independent full sort per genre, then slicing.
    fn oracle(c: &Corpus, s: &CorpusScores, spec: &SplitSpec) -> TransferSplit {
        let mut split = TransferSplit {
            spec: spec.clone(),
            model_hash: s.model_hash.clone(),
            on_test: Partition::new(),
            on_train: Partition::new(),
            on_val: Partition::new(),
            off_train: Partition::new(),
            off_val: Partition::new(),
        };
        for g in c.genres() {
            let mut docs: Vec<(f64, String)> = c
                .iter()
                .filter(|d| &d.genre == g)
                .map(|d| (s.scores[&d.id].theta[spec.topic], d.id.clone()))
                .collect();
            docs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let ids: Vec<String> = docs.iter().map(|d| d.1.clone()).collect();
            let (a, rest) = ids.split_at(spec.n_test);
            let (b, rest) = rest.split_at(spec.n_train);
            let (cc, _) = rest.split_at(spec.n_on_val);
            let mut remaining: Vec<(f64, String)> = docs
                .iter()
                .filter(|d| !a.contains(&d.1) && !b.contains(&d.1) && !cc.contains(&d.1))
                .cloned()
                .collect();
            remaining.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let low: Vec<String> = remaining.into_iter().map(|d| d.1).collect();
            split.on_test.insert(g.clone(), a.to_vec());
            split.on_train.insert(g.clone(), b.to_vec());
            split.on_val.insert(g.clone(), cc.to_vec());
            split.off_train.insert(g.clone(), low[..spec.n_train].to_vec());
            split.off_val.insert(g.clone(), low[spec.n_train..spec.n_train + spec.n_val].to_vec());
        }
        split
    }

    #[test]
    fn matches_sort_and_slice_oracle() {
        let mut rng = crate::seed::rng(61);
        for _ in 0..100 {
            let (c, s, spec) = random_case(&mut rng);
            let split = build_transfer_split(&c, &s, &spec).unwrap();
            assert_eq!(split, oracle(&c, &s, &spec));
        }
    }

    #[test]
    fn monotone_when_capacity_allows() {
        let mut rng = crate::seed::rng(62);
        for _ in 0..20 {
            let (c, s, spec) = random_case(&mut rng);
            let split = build_transfer_split(&c, &s, &spec).unwrap();
            for g in split.genres() {
                let score = |id: &String| s.scores[id].theta[spec.topic];
                let min_test = split.on_test[g].iter().map(score).fold(f64::INFINITY, f64::min);
                let max_off = split.off_train[g].iter().map(score).fold(f64::NEG_INFINITY, f64::max);
                assert!(min_test >= max_off);
            }
        }
    }

    #[test]
    fn emit_and_read_round_trip() {
        let mut rng = crate::seed::rng(63);
        let (c, s, spec) = random_case(&mut rng);
        let split = build_transfer_split(&c, &s, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = emit_split(&split, &c, dir.path()).unwrap();
        let (back, read_manifest) = read_split(dir.path()).unwrap();
        assert_eq!(back, split);
        assert_eq!(read_manifest, manifest);
        // rows = per-genre count × genres
        let genres = c.genres().len();
        for (name, per) in [
            ("on_test", spec.n_test),
            ("on_train", spec.n_train),
            ("off_train", spec.n_train),
            ("off_val", spec.n_val),
            ("on_val", spec.n_on_val),
        ] {
            let text = std::fs::read_to_string(dir.path().join(format!("{name}.jsonl"))).unwrap();
            assert_eq!(text.lines().count(), per * genres, "{name}");
        }

        let mut other = split.clone();
        other.model_hash = "different".into();
        let dir2 = tempfile::tempdir().unwrap();
        assert_ne!(emit_split(&other, &c, dir2.path()).unwrap().model_hash, manifest.model_hash);
    }
}
