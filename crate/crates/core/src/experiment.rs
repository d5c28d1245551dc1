//! Declarative experiment configuration and the end-to-end pipeline.
//!
//! ```toml
//! seed = 0
//! seeds = 5
//! conditions = ["on_topic", "off_topic", "aug_baseline", "aug_adapt"]
//!
//! [corpus]
//! path = "corpus.jsonl"   # omit to generate the default planted corpus
//!
//! [topics]
//! k = 6
//!
//! [split]
//! n_train = [30]
//!
//! [classifier]
//! backend = "builtin"     # "external" sends training to the adapter
//! ```
//!
//! Every random choice is seeded from `seed` through [`crate::seed::derive`],
//! so a rerun with the same configuration reproduces every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::{self, adapter_path_from_env, AdapterProcess, SharedAdapter, ADAPTER_ENV};
use crate::augment::{GeneratorConfig, GeneratorHandle};
use crate::classify::ClassifierConfig;
use crate::corpus::{self, build_vocabulary, Corpus, NormalizeOptions, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluate::{self, AdaptPool, Cell, CellFailure, ClassifierBackend, Condition, ConditionResult, ExperimentReport, RunSettings};
use crate::fsutil;
use crate::keywords::KeywordLimit;
use crate::seed;
use crate::splits::{self, build_transfer_split, score_corpus, CorpusScores, SplitSpec, TransferSplit};
use crate::synthkit::{self, PlantedSpec};
use crate::topics::{self, EtmParameters, LdaConfig, SelectionConfig, TopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Corpus file; when absent a planted corpus is generated from `planted`.
    pub path: Option<PathBuf>,
    pub planted: PlantedSpec,
    /// Topic-model vocabulary: minimum count and number of most frequent
    /// words moved to the stoplist.
    pub min_count: u64,
    pub stop_top_n: usize,
    /// Classifier vocabulary minimum count (no stoplist).
    pub feature_min_count: u64,
    /// Lowercase text while normalizing.
    pub lowercase: bool,
}

impl CorpusSection {
    pub fn normalize(&self) -> NormalizeOptions {
        NormalizeOptions { lowercase: self.lowercase }
    }
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            path: None,
            planted: PlantedSpec::default(),
            min_count: 2,
            stop_top_n: 44,
            feature_min_count: 2,
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub k: usize,
    /// When non-empty, K is chosen among these by coherence × diversity.
    pub candidates: Vec<usize>,
    pub sweeps: usize,
    pub hyper_alpha: Option<f64>,
    pub hyper_beta: f64,
    pub fold_in_sweeps: usize,
    /// Externally trained embedding-topic-model parameters to score instead of
    /// training LDA.
    pub etm: Option<PathBuf>,
}

impl Default for TopicsSection {
    fn default() -> Self {
        let lda = LdaConfig::default();
        TopicsSection {
            k: 6,
            candidates: Vec::new(),
            sweeps: 200,
            hyper_alpha: None,
            hyper_beta: lda.hyper_beta,
            fold_in_sweeps: 50,
            etm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub n_train: Vec<usize>,
    pub n_val: usize,
    pub n_test: usize,
    pub n_on_val: usize,
    /// Topics to evaluate; empty means all.
    pub topics: Vec<usize>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            n_train: vec![30],
            n_val: 100,
            n_test: 40,
            n_on_val: 10,
            topics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub keywords: KeywordLimit,
    pub n_original: Option<usize>,
    pub n_synthetic: Option<usize>,
    pub length: usize,
    pub order: usize,
    pub boost: f64,
    pub slot_keywords: usize,
    pub adapt_pool: AdaptPool,
    /// Builtin chain, or generation through the adapter.
    pub generator: BackendKind,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        AugmentSection {
            keywords: KeywordLimit::Top(crate::keywords::DEFAULT_KEYWORDS),
            n_original: None,
            n_synthetic: None,
            length: crate::augment::DEFAULT_LENGTH,
            order: g.order,
            boost: g.boost,
            slot_keywords: g.slot_keywords,
            adapt_pool: AdaptPool::OnTrain,
            generator: BackendKind::Builtin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub backend: BackendKind,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window: usize,
    pub fresh_windows: bool,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        ClassifierSection {
            backend: BackendKind::Builtin,
            learning_rate: c.learning_rate,
            l2: c.l2,
            epochs: c.epochs,
            batch_size: c.batch_size,
            window: c.window,
            fresh_windows: c.fresh_windows,
        }
    }
}

impl ClassifierSection {
    pub fn config(&self) -> ClassifierConfig {
        ClassifierConfig {
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.epochs,
            batch_size: self.batch_size,
            window: self.window,
            fresh_windows: self.fresh_windows,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Repetitions per cell.
    pub seeds: usize,
    pub out: PathBuf,
    pub jobs: usize,
    pub fail_fast: bool,
    pub conditions: Vec<Condition>,
    pub corpus: CorpusSection,
    pub topics: TopicsSection,
    pub split: SplitSection,
    pub augment: AugmentSection,
    pub classifier: ClassifierSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            seeds: 5,
            out: PathBuf::from("runs/default"),
            jobs: 1,
            fail_fast: false,
            conditions: Condition::MAIN.to_vec(),
            corpus: CorpusSection::default(),
            topics: TopicsSection::default(),
            split: SplitSection::default(),
            augment: AugmentSection::default(),
            classifier: ClassifierSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Read a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.split.n_train.is_empty() || self.conditions.is_empty() {
            return Err(Error::Config("the N grid and the condition list must be non-empty".into()));
        }
        if self.topics.k < 1 && self.topics.candidates.is_empty() {
            return Err(Error::Config("topic count must be at least 1".into()));
        }
        if let Some(p) = &self.corpus.path {
            if !p.exists() {
                return Err(Error::Config(format!("corpus file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Per-repetition seeds derived from the root seed.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| seed::derive(self.seed, &[&"run", &i])).collect()
    }

    pub fn lda(&self) -> LdaConfig {
        LdaConfig {
            k: self.topics.k,
            hyper_alpha: self.topics.hyper_alpha,
            hyper_beta: self.topics.hyper_beta,
            sweeps: self.topics.sweeps,
            seed: seed::derive(self.seed, &[&"lda"]),
            ..LdaConfig::default()
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            order: self.augment.order,
            boost: self.augment.boost,
            slot_keywords: self.augment.slot_keywords,
            fold_in_sweeps: self.topics.fold_in_sweeps,
            seed: seed::derive(self.seed, &[&"fold-in"]),
        }
    }

    pub fn settings(&self, backend: ClassifierBackend) -> RunSettings {
        RunSettings {
            classifier: self.classifier.config(),
            keywords: self.augment.keywords,
            n_original: self.augment.n_original,
            n_synthetic: self.augment.n_synthetic,
            length: self.augment.length,
            adapt_pool: self.augment.adapt_pool,
            backend,
        }
    }

    pub fn split_spec(&self, topic: usize, n_train: usize) -> SplitSpec {
        SplitSpec {
            topic,
            n_train,
            n_val: self.split.n_val,
            n_test: self.split.n_test,
            n_on_val: self.split.n_on_val,
            seed: self.seed,
        }
    }
}

/// Corpus, vocabularies, topic model and per-document topic scores.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub corpus: Corpus,
    pub topic_vocab: Vocabulary,
    pub features: Vocabulary,
    pub model: TopicModel,
    pub scores: CorpusScores,
    pub selection: Option<topics::TopicCountSelection>,
    /// Adapter session used by external backends.
    pub adapter: Option<SharedAdapter>,
}

/// Load or generate the corpus named by the configuration.
pub fn load_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    match &config.corpus.path {
        Some(p) => corpus::ingest_with(p, config.corpus.normalize()),
        None => Ok(synthkit::make_biased_corpus(&config.corpus.planted)?.0),
    }
}

/// Fit or load the topic model and score every document.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let corpus = load_corpus(config)?;
    prepare_with(config, corpus)
}

pub fn prepare_with(config: &ExperimentConfig, corpus: Corpus) -> Result<Prepared> {
    let topic_vocab = build_vocabulary(&corpus, config.corpus.min_count, config.corpus.stop_top_n)?;
    let features = build_vocabulary(&corpus, config.corpus.feature_min_count, 0)?;
    let (model, selection) = fit_topic_model(config, &corpus, &topic_vocab)?;
    let scores = score_corpus(&corpus, &model, config.topics.fold_in_sweeps, seed::derive(config.seed, &[&"fold-in"]))?;
    Ok(Prepared {
        config: config.clone(),
        corpus,
        topic_vocab,
        features,
        model,
        scores,
        selection,
        adapter: None,
    })
}

/// Load the configured ETM parameters, select K among the candidates, or
/// train LDA with the configured K.
pub fn fit_topic_model(
    config: &ExperimentConfig,
    corpus: &Corpus,
    topic_vocab: &Vocabulary,
) -> Result<(TopicModel, Option<topics::TopicCountSelection>)> {
    if let Some(etm) = &config.topics.etm {
        let params = EtmParameters::load(etm)?;
        let alpha = config.topics.hyper_alpha.unwrap_or(50.0 / params.alpha.len() as f64);
        Ok((params.into_model(topic_vocab.clone(), alpha)?, None))
    } else if !config.topics.candidates.is_empty() {
        let sel_cfg = SelectionConfig {
            lda: config.lda(),
            ..SelectionConfig::default()
        };
        let (sel, model) = topics::select_topic_count(corpus, topic_vocab, &config.topics.candidates, &sel_cfg)?;
        Ok((model, Some(sel)))
    } else {
        Ok((topics::train_lda(corpus, topic_vocab, &config.lda())?, None))
    }
}

/// A split and its generators.
pub struct CellData {
    pub split: TransferSplit,
    pub generators: BTreeMap<String, GeneratorHandle>,
}

impl CellData {
    pub fn cell<'a>(&'a self, p: &'a Prepared) -> Cell<'a> {
        Cell {
            corpus: &p.corpus,
            model: &p.model,
            scores: &p.scores,
            features: &p.features,
            split: &self.split,
            generators: &self.generators,
        }
    }
}

impl Prepared {
    fn require_adapter(&self) -> Result<&SharedAdapter> {
        self.adapter.as_ref().ok_or_else(|| {
            Error::Config(format!("an external backend is configured but no adapter is attached; set {ADAPTER_ENV}"))
        })
    }

    /// Run settings with the configured classifier backend.
    pub fn settings(&self) -> Result<RunSettings> {
        let backend = match self.config.classifier.backend {
            BackendKind::Builtin => ClassifierBackend::Builtin,
            BackendKind::External => ClassifierBackend::External(self.require_adapter()?.clone()),
        };
        Ok(self.config.settings(backend))
    }

    pub fn topics(&self) -> Vec<usize> {
        if self.config.split.topics.is_empty() {
            (0..self.model.k()).collect()
        } else {
            self.config.split.topics.clone()
        }
    }

    /// Build the split for (topic, N) and train its generators.
    pub fn cell_data(&self, topic: usize, n_train: usize) -> Result<CellData> {
        let split = build_transfer_split(&self.corpus, &self.scores, &self.config.split_spec(topic, n_train))?;
        let augmenting = self.config.conditions.iter().any(|c| !matches!(c, Condition::OnTopic | Condition::OffTopic));
        let generators = match (augmenting, self.config.augment.generator) {
            (false, _) => BTreeMap::new(),
            (true, BackendKind::Builtin) => Cell::train_generators(&self.corpus, &self.model, &self.scores, &split, &self.config.generator())?,
            (true, BackendKind::External) => {
                let link = self.require_adapter()?;
                split
                    .off_train
                    .iter()
                    .map(|(g, ids)| (g.clone(), GeneratorHandle::external(g.clone(), link.clone(), ids.clone())))
                    .collect()
            }
        };
        Ok(CellData { split, generators })
    }

    /// All cells of the grid, built on up to `jobs` threads.
    pub fn grid(&self, jobs: usize) -> Result<Vec<CellData>> {
        let keys: Vec<(usize, usize)> = self
            .config
            .split
            .n_train
            .iter()
            .flat_map(|&n| self.topics().into_iter().map(move |t| (t, n)))
            .collect();
        evaluate::parallel_map(&keys, jobs, |&(t, n)| self.cell_data(t, n)).into_iter().collect()
    }
}

/// Run `conditions` × seeds on every cell.
pub fn run_grid(
    prepared: &Prepared,
    grid: &[CellData],
    conditions: &[Condition],
    settings: &RunSettings,
    jobs: usize,
    fail_fast: bool,
) -> Result<ExperimentReport> {
    let seeds = prepared.config.run_seeds();
    let seeds = &seeds;
    let work: Vec<(usize, Condition, u64)> = (0..grid.len())
        .flat_map(|c| conditions.iter().flat_map(move |&cond| seeds.iter().map(move |&s| (c, cond, s))))
        .collect();
    let results = evaluate::parallel_map(&work, jobs, |&(c, cond, s)| evaluate::run_condition(&grid[c].cell(prepared), cond, settings, s));
    let mut cells: Vec<ConditionResult> = Vec::new();
    let mut failures = Vec::new();
    for (&(c, condition, seed), r) in work.iter().zip(results) {
        match r {
            Ok(x) => cells.push(x),
            Err(e) if !fail_fast => {
                log::error!("cell failed: {e}");
                failures.push(CellFailure {
                    topic: grid[c].split.spec.topic,
                    n_train: grid[c].split.spec.n_train,
                    condition,
                    seed,
                    error: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ExperimentReport::assemble(cells, failures))
}

/// Provenance written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub run_seeds: Vec<u64>,
    pub corpus_documents: usize,
    pub topic_vocabulary_hash: String,
    pub feature_vocabulary_hash: String,
    pub topic_model_hash: String,
    pub topic_count: usize,
    pub selection: Option<topics::TopicCountSelection>,
    pub splits: Vec<splits::SplitSpec>,
    pub cells_completed: usize,
    pub cells_failed: usize,
}

/// Spawn the adapter named by the environment when the configuration uses
/// an external backend.
pub fn connect_adapter(config: &ExperimentConfig) -> Result<Option<SharedAdapter>> {
    if config.classifier.backend == BackendKind::Builtin && config.augment.generator == BackendKind::Builtin {
        return Ok(None);
    }
    let path = adapter_path_from_env()
        .ok_or_else(|| Error::Config(format!("an external backend is configured; set {ADAPTER_ENV} to the adapter executable")))?;
    Ok(Some(adapter::share(AdapterProcess::spawn(&path, &[])?)))
}

/// Prepare, build the grid, run every configured condition and write
/// `report.csv`, `report.json`, `table.txt` and `manifest.json` to
/// `config.out`.
pub fn run_experiment(config: &ExperimentConfig, adapter: Option<SharedAdapter>) -> Result<ExperimentReport> {
    let mut prepared = prepare(config)?;
    prepared.adapter = adapter;
    let grid = prepared.grid(config.jobs)?;
    let settings = prepared.settings()?;
    let report = run_grid(&prepared, &grid, &config.conditions, &settings, config.jobs, config.fail_fast)?;
    report.write(&config.out)?;
    let manifest = RunManifest {
        config: config.clone(),
        run_seeds: config.run_seeds(),
        corpus_documents: prepared.corpus.len(),
        topic_vocabulary_hash: prepared.topic_vocab.content_hash(),
        feature_vocabulary_hash: prepared.features.content_hash(),
        topic_model_hash: prepared.model.content_hash(),
        topic_count: prepared.model.k(),
        selection: prepared.selection.clone(),
        splits: grid.iter().map(|c| c.split.spec.clone()).collect(),
        cells_completed: report.cells.len(),
        cells_failed: report.failures.len(),
    };
    fsutil::write_json_atomic(&config.out.join("manifest.json"), &manifest)?;
    Ok(report)
}
