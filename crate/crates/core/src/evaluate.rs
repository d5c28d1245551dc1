//! Macro-F1, paired t-tests, training conditions and report assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::adapter::{self, SharedAdapter};
use crate::augment::{self, AugMode, AugmentationPlan, GeneratorHandle, KeywordPool, SyntheticDocument, TrainingItem};
use crate::classify::{self, ClassifierConfig, LabeledText};
use crate::corpus::{self, Corpus, Document, Vocabulary};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::keywords::KeywordLimit;
use crate::seed;
use crate::splits::{CorpusScores, Partition, TransferSplit};
use crate::topics::TopicModel;

/// Unweighted mean over `genres` of per-genre F1. A genre that is never
/// predicted correctly (including one absent from both lists) scores 0.
pub fn macro_f1<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], gold: &[G], genres: &[String]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: gold.len(),
        });
    }
    if genres.is_empty() {
        return Err(Error::Config("macro-F1 needs at least one genre".into()));
    }
    let pos = |l: &str| {
        genres
            .iter()
            .position(|g| g == l)
            .ok_or_else(|| Error::Config(format!("label {l:?} is not a known genre")))
    };
    let mut tp = vec![0usize; genres.len()];
    let mut fp = vec![0usize; genres.len()];
    let mut fnc = vec![0usize; genres.len()];
    for (p, g) in predictions.iter().zip(gold) {
        let (p, g) = (pos(p.as_ref())?, pos(g.as_ref())?);
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnc[g] += 1;
        }
    }
    let total: f64 = (0..genres.len())
        .map(|i| {
            if tp[i] == 0 {
                0.0
            } else {
                2.0 * tp[i] as f64 / (2 * tp[i] + fp[i] + fnc[i]) as f64
            }
        })
        .sum();
    Ok(total / genres.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// Two-sided p-value.
    pub p: f64,
    pub mean_difference: f64,
    /// Set when the differences have zero variance but a nonzero mean: `t` is
    /// infinite and `p` is reported as 0, below any representable value.
    pub degenerate: bool,
}

/// Paired t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                df,
                p: 1.0,
                mean_difference: 0.0,
                degenerate: false,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                df,
                p: 0.0,
                mean_difference: mean,
                degenerate: true,
            }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        df,
        p,
        mean_difference: mean,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    OnTopic,
    OffTopic,
    AugBaseline,
    AugAdapt,
    Shuffled,
    SyntheticOnly,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::OnTopic,
        Condition::OffTopic,
        Condition::AugBaseline,
        Condition::AugAdapt,
        Condition::Shuffled,
        Condition::SyntheticOnly,
    ];
    /// The four columns of the transfer table.
    pub const MAIN: [Condition; 4] = [Condition::OnTopic, Condition::OffTopic, Condition::AugBaseline, Condition::AugAdapt];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::OnTopic => "on_topic",
            Condition::OffTopic => "off_topic",
            Condition::AugBaseline => "aug_baseline",
            Condition::AugAdapt => "aug_adapt",
            Condition::Shuffled => "shuffled",
            Condition::SyntheticOnly => "synthetic_only",
        }
    }

    fn mode(self) -> Option<AugMode> {
        match self {
            Condition::AugBaseline => Some(AugMode::Baseline),
            Condition::AugAdapt => Some(AugMode::Adapt),
            Condition::Shuffled => Some(AugMode::Shuffled),
            Condition::SyntheticOnly => Some(AugMode::SyntheticOnly),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}")))
    }
}

/// Where adapt-mode keywords come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptPool {
    /// On-topic training documents, used without labels; disjoint from the
    /// test set.
    #[default]
    OnTrain,
    /// The on-topic test documents themselves, as in the original protocol.
    OnTest,
}

#[derive(Clone, Default)]
pub enum ClassifierBackend {
    #[default]
    Builtin,
    External(SharedAdapter),
}

impl fmt::Debug for ClassifierBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierBackend::Builtin => "Builtin",
            ClassifierBackend::External(_) => "External",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub classifier: ClassifierConfig,
    pub keywords: KeywordLimit,
    /// Originals per genre in augmented conditions; defaults to N.
    pub n_original: Option<usize>,
    /// Synthetic documents per genre; defaults to N (1:1 mixing).
    pub n_synthetic: Option<usize>,
    pub length: usize,
    pub adapt_pool: AdaptPool,
    pub backend: ClassifierBackend,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            classifier: ClassifierConfig::default(),
            keywords: KeywordLimit::Top(crate::keywords::DEFAULT_KEYWORDS),
            n_original: None,
            n_synthetic: None,
            length: augment::DEFAULT_LENGTH,
            adapt_pool: AdaptPool::OnTrain,
            backend: ClassifierBackend::Builtin,
        }
    }
}

/// Everything a (topic, N) cell needs, shared read-only across conditions
/// and seeds.
pub struct Cell<'a> {
    pub corpus: &'a Corpus,
    pub model: &'a TopicModel,
    pub scores: &'a CorpusScores,
    /// Classifier feature vocabulary.
    pub features: &'a Vocabulary,
    pub split: &'a TransferSplit,
    pub generators: &'a BTreeMap<String, GeneratorHandle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub topic: usize,
    pub n_train: usize,
    pub condition: Condition,
    pub seed: u64,
    pub macro_f1: f64,
    pub best_epoch: usize,
    pub n_original: usize,
    pub n_synthetic: usize,
    pub keywords: String,
    pub model_hash: String,
    pub keyword_sources: usize,
}

impl Cell<'_> {
    fn docs(&self, part: &Partition) -> Result<Vec<&Document>> {
        self.corpus.select(TransferSplit::ids(part))
    }

    pub fn genres(&self) -> Vec<String> {
        self.split.genres().cloned().collect()
    }

    /// Train generators for every genre on its off-topic training documents.
    pub fn train_generators(
        corpus: &Corpus,
        model: &TopicModel,
        scores: &CorpusScores,
        split: &TransferSplit,
        config: &augment::GeneratorConfig,
    ) -> Result<BTreeMap<String, GeneratorHandle>> {
        split
            .off_train
            .iter()
            .map(|(g, ids)| {
                let docs = corpus.select(ids)?;
                Ok((g.clone(), augment::train_builtin_generator(g, &docs, model, Some(scores), config)?))
            })
            .collect()
    }

    /// This cell's generators retrained under `config`; external generators
    /// are returned unchanged.
    pub fn generators_like(&self, config: &augment::GeneratorConfig) -> Result<BTreeMap<String, GeneratorHandle>> {
        if self.generators.values().any(|h| matches!(h.backend, augment::GeneratorBackend::External(_))) {
            return Ok(self.generators.clone());
        }
        Self::train_generators(self.corpus, self.model, self.scores, self.split, config)
    }

    /// Keyword-source documents for an augmentation mode.
    pub fn pool_ids(&self, mode: AugMode, adapt_pool: AdaptPool) -> Vec<String> {
        let part = match (mode, adapt_pool) {
            (AugMode::Baseline, _) => &self.split.off_train,
            (_, AdaptPool::OnTrain) => &self.split.on_train,
            (_, AdaptPool::OnTest) => &self.split.on_test,
        };
        TransferSplit::ids(part).cloned().collect()
    }

    /// Synthetic documents for `mode`; adapt, shuffled and synthetic-only
    /// share one draw so they differ only in labels and mixing.
    pub fn synthetic(&self, mode: AugMode, settings: &RunSettings, per_genre: usize, seed: u64) -> Result<(AugmentationPlan, Vec<SyntheticDocument>)> {
        let pool_ids = self.pool_ids(mode, settings.adapt_pool);
        let pool_docs = self.corpus.select(&pool_ids)?;
        let sequences = augment::keyword_pool(&pool_docs, self.model, self.scores, settings.keywords)?;
        // baseline sources are labeled training documents, so each genre
        // regenerates its own; target documents are unlabeled
        let pool = if mode == AugMode::Baseline {
            KeywordPool::per_genre(sequences, |id| self.corpus.get(id).map(|d| d.genre.clone()))?
        } else {
            KeywordPool::Shared(sequences)
        };
        let n = self.split.spec.n_train;
        let plan = AugmentationPlan {
            n_original: if mode == AugMode::SyntheticOnly {
                0
            } else {
                settings.n_original.unwrap_or(n)
            },
            n_synthetic: per_genre,
            mode,
            keyword_pool: pool_ids,
        };
        fn set(p: &Partition) -> BTreeSet<&str> {
            TransferSplit::ids(p).map(String::as_str).collect()
        }
        let on = match settings.adapt_pool {
            AdaptPool::OnTrain => set(&self.split.on_train),
            AdaptPool::OnTest => set(&self.split.on_test),
        };
        let test = if settings.adapt_pool == AdaptPool::OnTest {
            BTreeSet::new()
        } else {
            set(&self.split.on_test)
        };
        plan.validate(&on, &set(&self.split.off_train), &test)?;
        let docs = augment::build_synthetic_set(
            self.generators,
            &self.genres(),
            &pool,
            per_genre,
            settings.length,
            seed::derive(seed, &[&"synthetic"]),
        )?;
        let docs = if mode == AugMode::Shuffled {
            augment::shuffle_labels(docs, seed)
        } else {
            docs
        };
        Ok((plan, docs))
    }

    /// Training items for `condition` under `settings`.
    pub fn training_set(&self, condition: Condition, settings: &RunSettings, seed: u64) -> Result<(Vec<TrainingItem>, Option<AugmentationPlan>)> {
        let as_items = |docs: Vec<&Document>| {
            docs.into_iter()
                .map(|d| TrainingItem {
                    id: d.id.clone(),
                    genre: d.genre.clone(),
                    text: d.norm_text.clone(),
                    synthetic: false,
                })
                .collect::<Vec<_>>()
        };
        match condition {
            Condition::OnTopic => Ok((as_items(self.docs(&self.split.on_train)?), None)),
            Condition::OffTopic => Ok((as_items(self.docs(&self.split.off_train)?), None)),
            _ => {
                let mode = condition.mode().expect("augmented condition");
                let per_genre = settings.n_synthetic.unwrap_or(self.split.spec.n_train);
                let (plan, synthetic) = self.synthetic(mode, settings, per_genre, seed)?;
                let originals = self.docs(&self.split.off_train)?;
                let items = augment::mix(&originals, &synthetic, &plan, seed)?;
                Ok((items, Some(plan)))
            }
        }
    }
}

/// Train on the condition's training set, validate, and score macro-F1 on
/// one random window of each on-topic test document.
pub fn run_condition(cell: &Cell, condition: Condition, settings: &RunSettings, seed: u64) -> Result<ConditionResult> {
    let (items, plan) = cell.training_set(condition, settings, seed)?;
    let val_part = if condition == Condition::OnTopic {
        if cell.split.spec.n_on_val == 0 {
            return Err(Error::Config("the on-topic condition needs an on-topic validation set".into()));
        }
        &cell.split.on_val
    } else {
        &cell.split.off_val
    };
    let val_docs = cell.docs(val_part)?;
    let test_docs = cell.docs(&cell.split.on_test)?;
    let genres = cell.genres();
    let test_seed = seed::derive(seed, &[&"test-windows"]);
    let gold: Vec<&str> = test_docs.iter().map(|d| d.genre.as_str()).collect();

    let (predicted, best_epoch) = match &settings.backend {
        ClassifierBackend::Builtin => {
            let train: Vec<LabeledText> = items.iter().map(|d| LabeledText { text: &d.text, genre: &d.genre }).collect();
            let val: Vec<LabeledText> = val_docs.iter().map(|d| LabeledText { text: &d.norm_text, genre: &d.genre }).collect();
            let config = ClassifierConfig {
                seed: seed::derive(seed, &[&"classifier"]),
                ..settings.classifier.clone()
            };
            let model = classify::train_classifier(&train, &val, cell.features, &config)?;
            let texts: Vec<&str> = test_docs.iter().map(|d| d.norm_text.as_str()).collect();
            (classify::predict_windows(&model, &texts, test_seed), model.best_epoch)
        }
        ClassifierBackend::External(link) => (external_run(link, &items, &val_docs, &test_docs, settings, seed)?, 0),
    };
    let f1 = macro_f1(&predicted, &gold, &genres)?;
    let (n_original, n_synthetic) = match &plan {
        Some(p) => (p.n_original, p.n_synthetic),
        None => (cell.split.spec.n_train, 0),
    };
    Ok(ConditionResult {
        topic: cell.split.spec.topic,
        n_train: cell.split.spec.n_train,
        condition,
        seed,
        macro_f1: f1,
        best_epoch,
        n_original,
        n_synthetic,
        keywords: settings.keywords.to_string(),
        model_hash: cell.split.model_hash.clone(),
        keyword_sources: plan.map_or(0, |p| p.keyword_pool.len()),
    })
}

fn external_run(
    link: &SharedAdapter,
    items: &[TrainingItem],
    val: &[&Document],
    test: &[&Document],
    settings: &RunSettings,
    seed: u64,
) -> Result<Vec<String>> {
    let dir = tempdir_for(seed)?;
    let train_docs: Vec<Document> = items.iter().map(|i| Document::new(i.id.clone(), i.genre.clone(), i.text.clone())).collect();
    let train_path = dir.join("train.jsonl");
    let val_path = dir.join("val.jsonl");
    corpus::emit(train_docs.iter(), &train_path)?;
    corpus::emit(val.iter().copied(), &val_path)?;
    let manifest = dir.join("manifest.json");
    fsutil::write_json_atomic(&manifest, &serde_json::json!({"train": train_path, "val": val_path, "seed": seed}))?;
    let mut rng = seed::rng(seed::derive(seed, &[&"test-windows"]));
    let width = settings.classifier.window.max(1);
    let texts: Vec<String> = test
        .iter()
        .map(|d| {
            if settings.classifier.window == 0 {
                d.norm_text.clone()
            } else {
                corpus::sample_window(d, width, &mut rng).to_owned()
            }
        })
        .collect();
    let mut guard = link.lock().map_err(|_| Error::adapter("adapter session poisoned"))?;
    adapter::train(guard.as_mut(), &manifest, &train_path, &val_path, seed)?;
    let labels = adapter::predict(guard.as_mut(), &texts)?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(labels)
}

fn tempdir_for(seed: u64) -> Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("topicshift-{}-{seed:016x}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Run `f` over `items` on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<U>>> = items.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every item processed"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub condition: Condition,
    pub n_train: usize,
    pub cells: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n_train: usize,
    pub a: Condition,
    pub b: Condition,
    /// Pairs are per-seed means over topics.
    pub test: TTest,
}

/// A failed cell, kept so that partial runs remain auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub topic: usize,
    pub n_train: usize,
    pub condition: Condition,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<ConditionResult>,
    pub failures: Vec<CellFailure>,
    pub summaries: Vec<Summary>,
    pub comparisons: Vec<Comparison>,
}

/// Condition pairs compared in every report.
pub const COMPARISONS: [(Condition, Condition); 6] = [
    (Condition::OnTopic, Condition::OffTopic),
    (Condition::AugAdapt, Condition::OffTopic),
    (Condition::AugAdapt, Condition::AugBaseline),
    (Condition::AugBaseline, Condition::OffTopic),
    (Condition::Shuffled, Condition::OffTopic),
    (Condition::SyntheticOnly, Condition::OffTopic),
];

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-topic mean F1 of one condition at one N, keyed by topic.
pub fn topic_means(cells: &[ConditionResult], condition: Condition, n_train: usize) -> BTreeMap<usize, f64> {
    let mut by_topic: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.condition == condition && c.n_train == n_train) {
        by_topic.entry(c.topic).or_default().push(c.macro_f1);
    }
    by_topic.into_iter().map(|(t, v)| (t, mean_std(&v).0)).collect()
}

/// Per-seed mean F1 of one condition at one N over topics, keyed by seed.
pub fn seed_means(cells: &[ConditionResult], condition: Condition, n_train: usize) -> BTreeMap<u64, f64> {
    let mut by_seed: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.condition == condition && c.n_train == n_train) {
        by_seed.entry(c.seed).or_default().push(c.macro_f1);
    }
    by_seed.into_iter().map(|(s, v)| (s, mean_std(&v).0)).collect()
}

impl ExperimentReport {
    /// Sort cells and compute summaries and comparisons.
    pub fn assemble(mut cells: Vec<ConditionResult>, failures: Vec<CellFailure>) -> Self {
        cells.sort_by(|a, b| {
            (a.n_train, a.topic, a.condition, a.seed).cmp(&(b.n_train, b.topic, b.condition, b.seed))
        });
        let mut groups: BTreeMap<(usize, Condition), Vec<f64>> = BTreeMap::new();
        for c in &cells {
            groups.entry((c.n_train, c.condition)).or_default().push(c.macro_f1);
        }
        let summaries = groups
            .iter()
            .map(|(&(n_train, condition), v)| {
                let (mean, std) = mean_std(v);
                Summary {
                    condition,
                    n_train,
                    cells: v.len(),
                    mean,
                    std,
                }
            })
            .collect();
        let ns: BTreeSet<usize> = cells.iter().map(|c| c.n_train).collect();
        let mut comparisons = Vec::new();
        for &n in &ns {
            for (a, b) in COMPARISONS {
                let ma = seed_means(&cells, a, n);
                let mb = seed_means(&cells, b, n);
                let seeds: Vec<u64> = ma.keys().filter(|s| mb.contains_key(s)).copied().collect();
                let xa: Vec<f64> = seeds.iter().map(|s| ma[s]).collect();
                let xb: Vec<f64> = seeds.iter().map(|s| mb[s]).collect();
                if let Ok(test) = paired_t_test(&xa, &xb) {
                    comparisons.push(Comparison { n_train: n, a, b, test });
                }
            }
        }
        ExperimentReport {
            cells,
            failures,
            summaries,
            comparisons,
        }
    }

    pub fn summary(&self, condition: Condition, n_train: usize) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.condition == condition && s.n_train == n_train)
    }

    pub fn comparison(&self, a: Condition, b: Condition, n_train: usize) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b && c.n_train == n_train)
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topic,n_train,condition,seed,macro_f1,best_epoch,n_original,n_synthetic,keywords\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{},{},{}\n",
                c.topic, c.n_train, c.condition, c.seed, c.macro_f1, c.best_epoch, c.n_original, c.n_synthetic, c.keywords
            ));
        }
        out
    }

    /// Transfer table: one row per N, one column per main condition (mean
    /// macro-F1 in points).
    pub fn table(&self) -> String {
        let ns: BTreeSet<usize> = self.cells.iter().map(|c| c.n_train).collect();
        let mut out = format!("{:>6}", "N");
        for c in Condition::MAIN {
            out.push_str(&format!(" {:>13}", c.as_str()));
        }
        out.push('\n');
        for n in ns {
            out.push_str(&format!("{n:>6}"));
            for c in Condition::MAIN {
                match self.summary(c, n) {
                    Some(s) => out.push_str(&format!(" {:>13.1}", 100.0 * s.mean)),
                    None => out.push_str(&format!(" {:>13}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Write `report.csv`, `report.json` and `table.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fsutil::write_atomic(&dir.join("report.csv"), self.to_csv().as_bytes())?;
        fsutil::write_json_atomic(&dir.join("report.json"), self)?;
        fsutil::write_atomic(&dir.join("table.txt"), self.table().as_bytes())
    }
}

/// One point of an ablation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub n_original: usize,
    pub n_synthetic: usize,
    pub condition: Condition,
    pub mean_f1: f64,
    pub per_topic: BTreeMap<usize, f64>,
    pub cells: Vec<ConditionResult>,
}

fn sweep_point(label: String, condition: Condition, cells: Vec<ConditionResult>) -> SweepPoint {
    let n_train = cells.first().map_or(0, |c| c.n_train);
    let per_topic = topic_means(&cells, condition, n_train);
    let mean_f1 = cells.iter().map(|c| c.macro_f1).sum::<f64>() / cells.len().max(1) as f64;
    SweepPoint {
        label,
        n_original: cells.first().map_or(0, |c| c.n_original),
        n_synthetic: cells.first().map_or(0, |c| c.n_synthetic),
        condition,
        mean_f1,
        per_topic,
        cells,
    }
}

fn run_grid(cells: &[Cell], condition: Condition, settings: &RunSettings, seeds: &[u64], jobs: usize) -> Result<Vec<ConditionResult>> {
    let work: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    parallel_map(&work, jobs, |&(c, s)| run_condition(&cells[c], condition, settings, s))
        .into_iter()
        .collect()
}

/// Aug-adapt F1 for each keyword limit, everything else fixed. Built-in
/// generators are retrained with the same number of slot keywords, so each
/// generator learns from inputs shaped like the ones it is given; external
/// generators are used as they are.
pub fn keyword_sweep(
    cells: &[Cell],
    limits: &[KeywordLimit],
    generator: &augment::GeneratorConfig,
    settings: &RunSettings,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    limits
        .iter()
        .map(|&limit| {
            let config = augment::GeneratorConfig {
                slot_keywords: limit.get(),
                ..generator.clone()
            };
            let retrained: Vec<BTreeMap<String, GeneratorHandle>> =
                parallel_map(cells, jobs, |c| c.generators_like(&config)).into_iter().collect::<Result<_>>()?;
            let swept: Vec<Cell> = cells.iter().zip(&retrained).map(|(c, g)| Cell { generators: g, ..*c }).collect();
            let s = RunSettings {
                keywords: limit,
                ..settings.clone()
            };
            Ok(sweep_point(limit.to_string(), Condition::AugAdapt, run_grid(&swept, Condition::AugAdapt, &s, seeds, jobs)?))
        })
        .collect()
}

/// One row of a mixing ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixRow {
    pub n_original: usize,
    pub n_synthetic: usize,
    pub condition: Condition,
}

/// F1 for each (originals, synthetic, condition) row. Rows with no
/// synthetic documents run the plain off-topic condition.
pub fn mix_sweep(cells: &[Cell], rows: &[MixRow], settings: &RunSettings, seeds: &[u64], jobs: usize) -> Result<Vec<SweepPoint>> {
    rows.iter()
        .map(|row| {
            let condition = if row.n_synthetic == 0 {
                Condition::OffTopic
            } else if row.n_original == 0 && row.condition == Condition::AugAdapt {
                Condition::SyntheticOnly
            } else {
                row.condition
            };
            let s = RunSettings {
                n_original: Some(row.n_original),
                n_synthetic: Some(row.n_synthetic),
                ..settings.clone()
            };
            let label = format!("{}+{} {}", row.n_original, row.n_synthetic, condition);
            Ok(sweep_point(label, condition, run_grid(cells, condition, &s, seeds, jobs)?))
        })
        .collect()
}

/// Plot-data file: one `{x, y}` series per sweep.
pub fn write_plot_data(path: &Path, name: &str, points: &[SweepPoint]) -> Result<()> {
    let series: Vec<serde_json::Value> = points
        .iter()
        .map(|p| serde_json::json!({"x": p.label, "y": p.mean_f1, "per_topic": p.per_topic}))
        .collect();
    fsutil::write_json_atomic(path, &serde_json::json!({"series": name, "points": series}))
}
