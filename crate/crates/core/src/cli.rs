//! The `topicshift` command line.
//!
//! Every subcommand starts from the experiment configuration (`--config`, or
//! the defaults), applies the global overrides, writes its artifacts under
//! `--out` and records a `<command>.manifest.json` naming its inputs (with
//! content hashes), outputs and the resolved configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adapter::{self, ADAPTER_ENV};
use crate::augment::{self, AugMode, AugmentationPlan, SyntheticDocument};
use crate::classify::{self, ClassifierModel, LabeledText};
use crate::corpus::{self, build_vocabulary, Corpus, Document};
use crate::error::{Error, Result};
use crate::evaluate::{self, Cell, Condition, ExperimentReport, MixRow, SweepPoint};
use crate::experiment::{self, BackendKind, ExperimentConfig, Prepared};
use crate::keywords::{self, KeywordLimit};
use crate::splits::{self, CorpusScores, PARTITIONS};
use crate::synthkit;
use crate::topics::TopicModel;
use crate::{fsutil, seed};

#[derive(Debug, Parser)]
#[command(name = "topicshift", version, about = "Measure and mitigate the topical transfer gap of genre classifiers")]
#[command(after_help = "The external adapter executable is read from the TOPICSHIFT_ADAPTER environment variable.")]
pub struct Cli {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the configuration.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Abort on the first failed cell instead of recording it.
    #[arg(long, global = true)]
    pub fail_fast: bool,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a corpus file and summarize its genres and vocabularies.
    Ingest {
        input: PathBuf,
    },
    #[command(subcommand)]
    Topics(TopicsCommand),
    #[command(subcommand)]
    Split(SplitCommand),
    #[command(subcommand)]
    Keywords(KeywordsCommand),
    #[command(subcommand)]
    Augment(AugmentCommand),
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Run the configured condition grid and write the report.
    Report,
    #[command(subcommand)]
    Ablate(AblateCommand),
    #[command(subcommand)]
    Synthkit(SynthkitCommand),
}

/// Corpus override shared by the corpus-reading subcommands.
#[derive(Debug, Clone, Args)]
pub struct CorpusArg {
    /// Corpus file; defaults to the configured corpus or the planted one.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TopicsCommand {
    /// Train a topic model with the configured K.
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Choose K among candidates by coherence × diversity.
    Select {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<usize>,
    },
    /// Score every document against a trained model.
    Score {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SplitCommand {
    /// Build the on-topic / off-topic split for one topic.
    Build {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        #[arg(long)]
        topic: usize,
        /// Training documents per genre; defaults to the first configured N.
        #[arg(long)]
        n_train: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum KeywordsCommand {
    /// Extract keyword sequences from a corpus or one split partition.
    Extract {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        /// Split directory; with it only `--partition` is read.
        #[arg(long, value_name = "DIR")]
        split: Option<PathBuf>,
        #[arg(long, default_value = "on_train")]
        partition: String,
        /// Distinct keywords per document, or "all".
        #[arg(long)]
        limit: Option<KeywordLimit>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Adapt,
    Baseline,
    Shuffled,
    SyntheticOnly,
}

impl From<ModeArg> for AugMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Adapt => AugMode::Adapt,
            ModeArg::Baseline => AugMode::Baseline,
            ModeArg::Shuffled => AugMode::Shuffled,
            ModeArg::SyntheticOnly => AugMode::SyntheticOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum AugmentCommand {
    /// Train per-genre generators on a split and write synthetic documents.
    Generate {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        #[arg(long, value_name = "DIR")]
        split: PathBuf,
        #[arg(long, value_enum, default_value = "adapt")]
        mode: ModeArg,
        /// Synthetic documents per genre; defaults to the split's N.
        #[arg(long)]
        per_genre: Option<usize>,
    },
    /// Mix a split's off-topic training documents with synthetic ones.
    Mix {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_name = "DIR")]
        split: PathBuf,
        #[arg(long, value_name = "FILE")]
        synthetic: PathBuf,
        #[arg(long)]
        n_original: Option<usize>,
        #[arg(long)]
        n_synthetic: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ClassifyCommand {
    /// Train the genre classifier on a corpus-format file.
    Train {
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        #[arg(long, value_name = "FILE")]
        val: PathBuf,
        /// Corpus whose vocabulary becomes the feature set; defaults to the
        /// training file.
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,
    },
    /// Classify one random window per test document and score macro-F1.
    Eval {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        test: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AblateCommand {
    /// Aug-adapt F1 as a function of keywords per source.
    Keywords {
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,all")]
        limits: Vec<KeywordLimit>,
    },
    /// F1 for (originals + synthetic) rows such as `30+30` or `30+30:aug_baseline`.
    Mix {
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
    },
    /// Off-topic, aug-adapt and shuffled-label aug-adapt side by side.
    Shuffle,
}

#[derive(Debug, Subcommand)]
pub enum SynthkitCommand {
    /// Write a planted corpus and its ground-truth sidecar.
    Make {
        /// Topic↔genre correlation; overrides the configuration.
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long)]
        docs_per_genre: Option<usize>,
    },
}

/// Parse arguments, run, and map errors to exit codes: 2 for configuration
/// errors, 1 otherwise.
pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}

/// The configuration with `cli`'s global overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        config.jobs = j;
    }
    if cli.fail_fast {
        config.fail_fast = true;
    }
    if let Some(o) = &cli.out {
        config.out = o.clone();
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let mut run = Run::new(&config);
    let name = match &cli.command {
        Command::Ingest { input } => ingest(&mut run, input),
        Command::Topics(c) => topics(&mut run, c),
        Command::Split(SplitCommand::Build { corpus, scores, topic, n_train }) => split_build(&mut run, corpus, scores, *topic, *n_train),
        Command::Keywords(KeywordsCommand::Extract { corpus, model, scores, split, partition, limit }) => {
            keywords_extract(&mut run, corpus, model, scores, split.as_deref(), partition, *limit)
        }
        Command::Augment(c) => augment(&mut run, c),
        Command::Classify(c) => classify(&mut run, c),
        Command::Report => report(&mut run),
        Command::Ablate(c) => ablate(&mut run, c),
        Command::Synthkit(SynthkitCommand::Make { bias, docs_per_genre }) => synthkit_make(&mut run, *bias, *docs_per_genre, cli.seed),
    }?;
    run.finish(name)
}

#[derive(Debug, Serialize)]
struct InputRecord {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct CommandManifest<'a> {
    command: String,
    seed: u64,
    inputs: BTreeMap<String, InputRecord>,
    outputs: Vec<PathBuf>,
    config: &'a ExperimentConfig,
}

/// One subcommand invocation: its configuration and provenance record.
struct Run<'a> {
    config: &'a ExperimentConfig,
    inputs: BTreeMap<String, InputRecord>,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(config: &'a ExperimentConfig) -> Self {
        Run {
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(
            name.to_owned(),
            InputRecord {
                path: path.to_path_buf(),
                sha256: fsutil::sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    fn output(&mut self, path: PathBuf) -> PathBuf {
        self.outputs.push(path.clone());
        path
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.output(self.out(name));
        fsutil::write_json_atomic(&path, value)
    }

    fn finish(self, command: &str) -> Result<()> {
        let manifest = CommandManifest {
            command: command.to_owned(),
            seed: self.config.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            config: self.config,
        };
        let file = format!("{}.manifest.json", command.replace(' ', "-"));
        fsutil::write_json_atomic(&self.config.out.join(file), &manifest)
    }

    /// The `--corpus` file, else the configured corpus.
    fn corpus(&mut self, arg: &CorpusArg) -> Result<Corpus> {
        let path = arg.corpus.as_ref().or(self.config.corpus.path.as_ref()).cloned();
        match path {
            Some(p) => {
                self.input("corpus", &p)?;
                corpus::ingest_with(&p, self.config.corpus.normalize())
            }
            None => experiment::load_corpus(self.config),
        }
    }

    fn model(&mut self, path: &Path) -> Result<TopicModel> {
        self.input("topic_model", path)?;
        TopicModel::load(path)
    }

    fn scores(&mut self, path: &Path) -> Result<CorpusScores> {
        self.input("scores", path)?;
        fsutil::read_json(path)
    }

    fn adapter(&self) -> Result<Option<adapter::SharedAdapter>> {
        experiment::connect_adapter(self.config)
    }
}

fn ingest(run: &mut Run, input: &Path) -> Result<&'static str> {
    run.input("input", input)?;
    let corpus = corpus::ingest_with(input, run.config.corpus.normalize())?;
    let path = run.output(run.out("corpus.jsonl"));
    corpus::emit(corpus.iter(), &path)?;
    let topic_vocab = build_vocabulary(&corpus, run.config.corpus.min_count, run.config.corpus.stop_top_n)?;
    let features = build_vocabulary(&corpus, run.config.corpus.feature_min_count, 0)?;
    let mut genres: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &corpus {
        *genres.entry(d.genre.as_str()).or_default() += 1;
    }
    println!("{} documents, {} genres", corpus.len(), genres.len());
    for (g, n) in &genres {
        println!("  {g:<16} {n}");
    }
    println!("topic vocabulary {} words, feature vocabulary {} words", topic_vocab.len(), features.len());
    run.write_json(
        "ingest.json",
        &serde_json::json!({
            "documents": corpus.len(),
            "genres": genres,
            "topic_vocabulary": topic_vocab.len(),
            "feature_vocabulary": features.len(),
            "stoplist": topic_vocab.stoplist(),
        }),
    )?;
    Ok("ingest")
}

fn print_topics(model: &TopicModel) -> Result<()> {
    for t in 0..model.k() {
        println!("topic {t:>2}: {}", model.top_words(t, 10)?.join(" "));
    }
    Ok(())
}

fn topics(run: &mut Run, command: &TopicsCommand) -> Result<&'static str> {
    let name = match command {
        TopicsCommand::Train { corpus, k } => {
            let mut config = run.config.clone();
            config.topics.candidates.clear();
            if let Some(k) = k {
                config.topics.k = *k;
            }
            let corpus = run.corpus(corpus)?;
            let vocab = build_vocabulary(&corpus, config.corpus.min_count, config.corpus.stop_top_n)?;
            let (model, _) = experiment::fit_topic_model(&config, &corpus, &vocab)?;
            print_topics(&model)?;
            model.save(&run.output(run.out("topic_model.json")))?;
            "topics train"
        }
        TopicsCommand::Select { corpus, candidates } => {
            let mut config = run.config.clone();
            if !candidates.is_empty() {
                config.topics.candidates = candidates.clone();
            }
            if config.topics.candidates.is_empty() {
                return Err(Error::Config("no candidate topic counts; pass --candidates or set topics.candidates".into()));
            }
            let corpus = run.corpus(corpus)?;
            let vocab = build_vocabulary(&corpus, config.corpus.min_count, config.corpus.stop_top_n)?;
            let (model, selection) = experiment::fit_topic_model(&config, &corpus, &vocab)?;
            let selection = selection.expect("candidates given");
            for c in &selection.scores {
                println!("K={:<3} coherence {:.4} diversity {:.4} product {:.4}", c.k, c.coherence, c.diversity, c.product);
            }
            println!("chosen K={}", selection.chosen);
            print_topics(&model)?;
            model.save(&run.output(run.out("topic_model.json")))?;
            run.write_json("selection.json", &selection)?;
            "topics select"
        }
        TopicsCommand::Score { corpus, model } => {
            let corpus = run.corpus(corpus)?;
            let model = run.model(model)?;
            let scores = splits::score_corpus(&corpus, &model, run.config.topics.fold_in_sweeps, seed::derive(run.config.seed, &[&"fold-in"]))?;
            println!("scored {} documents, {} unscorable", scores.scores.len(), scores.unscorable.len());
            run.write_json("scores.json", &scores)?;
            "topics score"
        }
    };
    Ok(name)
}

fn split_build(run: &mut Run, corpus: &CorpusArg, scores: &Path, topic: usize, n_train: Option<usize>) -> Result<&'static str> {
    let corpus = run.corpus(corpus)?;
    let scores = run.scores(scores)?;
    let n = n_train.unwrap_or(run.config.split.n_train[0]);
    let split = splits::build_transfer_split(&corpus, &scores, &run.config.split_spec(topic, n))?;
    let dir = run.config.out.clone();
    let manifest = splits::emit_split(&split, &corpus, &dir)?;
    for name in PARTITIONS {
        run.output(dir.join(&manifest.files[name]));
        let total: usize = manifest.counts[name].values().sum();
        println!("{name:<10} {total:>5} documents");
    }
    run.output(dir.join(splits::MANIFEST_FILE));
    Ok("split build")
}

fn keywords_extract(
    run: &mut Run,
    corpus: &CorpusArg,
    model: &Path,
    scores: &Path,
    split: Option<&Path>,
    partition: &str,
    limit: Option<KeywordLimit>,
) -> Result<&'static str> {
    let corpus = run.corpus(corpus)?;
    let model = run.model(model)?;
    let scores = run.scores(scores)?;
    let docs: Vec<&Document> = match split {
        Some(dir) => {
            let (split, _) = splits::read_split(dir)?;
            let part = split
                .partition(partition)
                .ok_or_else(|| Error::Config(format!("unknown partition {partition:?}; expected one of {}", PARTITIONS.join(", "))))?;
            corpus.select(splits::TransferSplit::ids(part))?
        }
        None => corpus.iter().collect(),
    };
    let limit = limit.unwrap_or(run.config.augment.keywords);
    let pool = augment::keyword_pool(&docs, &model, &scores, limit)?;
    let path = run.output(run.out("keywords.jsonl"));
    keywords::write_keyword_file(&path, &pool)?;
    println!("{} keyword sequences (limit {limit})", pool.len());
    Ok("keywords extract")
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    fsutil::write_atomic(path, &out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn augment(run: &mut Run, command: &AugmentCommand) -> Result<&'static str> {
    let name = match command {
        AugmentCommand::Generate { corpus, model, scores, split, mode, per_genre } => {
            let corpus = run.corpus(corpus)?;
            let model = run.model(model)?;
            let scores = run.scores(scores)?;
            run.input("split", &split.join(splits::MANIFEST_FILE))?;
            let (split, _) = splits::read_split(split)?;
            let features = build_vocabulary(&corpus, run.config.corpus.feature_min_count, 0)?;
            let generators = match run.config.augment.generator {
                BackendKind::Builtin => Cell::train_generators(&corpus, &model, &scores, &split, &run.config.generator())?,
                BackendKind::External => {
                    let link = run
                        .adapter()?
                        .ok_or_else(|| Error::Config(format!("external generator configured; set {ADAPTER_ENV}")))?;
                    split
                        .off_train
                        .iter()
                        .map(|(g, ids)| (g.clone(), augment::GeneratorHandle::external(g.clone(), link.clone(), ids.clone())))
                        .collect()
                }
            };
            let cell = Cell {
                corpus: &corpus,
                model: &model,
                scores: &scores,
                features: &features,
                split: &split,
                generators: &generators,
            };
            let settings = run.config.settings(evaluate::ClassifierBackend::Builtin);
            let per_genre = per_genre.or(run.config.augment.n_synthetic).unwrap_or(split.spec.n_train);
            let (plan, docs) = cell.synthetic((*mode).into(), &settings, per_genre, seed::derive(run.config.seed, &[&"augment"]))?;
            write_jsonl(&run.output(run.out("synthetic.jsonl")), &docs)?;
            run.write_json("plan.json", &plan)?;
            println!("{} synthetic documents ({:?}, {} keyword sources)", docs.len(), plan.mode, plan.keyword_pool.len());
            "augment generate"
        }
        AugmentCommand::Mix { corpus, split, synthetic, n_original, n_synthetic } => {
            let corpus = run.corpus(corpus)?;
            run.input("split", &split.join(splits::MANIFEST_FILE))?;
            run.input("synthetic", synthetic)?;
            let (split, _) = splits::read_split(split)?;
            let docs: Vec<SyntheticDocument> = read_jsonl(synthetic)?;
            let originals = corpus.select(splits::TransferSplit::ids(&split.off_train))?;
            let min_per_genre = |counts: BTreeMap<&str, usize>| counts.values().copied().min().unwrap_or(0);
            let mut syn_counts: BTreeMap<&str, usize> = BTreeMap::new();
            for d in &docs {
                *syn_counts.entry(d.genre.as_str()).or_default() += 1;
            }
            let plan = AugmentationPlan {
                n_original: n_original.unwrap_or(split.spec.n_train),
                n_synthetic: n_synthetic.unwrap_or_else(|| min_per_genre(syn_counts)),
                mode: AugMode::Adapt,
                keyword_pool: docs.iter().map(|d| d.keywords.source_doc.clone()).collect(),
            };
            let items = augment::mix(&originals, &docs, &plan, seed::derive(run.config.seed, &[&"augment"]))?;
            let mixed: Vec<Document> = items
                .iter()
                .map(|i| {
                    let mut d = Document::new(i.id.clone(), i.genre.clone(), i.text.clone());
                    d.extra.insert("synthetic".into(), serde_json::Value::Bool(i.synthetic));
                    d
                })
                .collect();
            let path = run.output(run.out("train.jsonl"));
            corpus::emit(mixed.iter(), &path)?;
            println!("{} training documents ({} per genre original, {} synthetic)", mixed.len(), plan.n_original, plan.n_synthetic);
            "augment mix"
        }
    };
    Ok(name)
}

fn labeled(corpus: &Corpus) -> Vec<LabeledText<'_>> {
    corpus.iter().map(|d| LabeledText { text: &d.norm_text, genre: &d.genre }).collect()
}

fn classify(run: &mut Run, command: &ClassifyCommand) -> Result<&'static str> {
    let opts = run.config.corpus.normalize();
    let name = match command {
        ClassifyCommand::Train { train, val, features } => {
            run.input("train", train)?;
            run.input("val", val)?;
            if run.config.classifier.backend == BackendKind::External {
                let link = run
                    .adapter()?
                    .ok_or_else(|| Error::Config(format!("external classifier configured; set {ADAPTER_ENV}")))?;
                let manifest = run.out("adapter-train.json");
                fsutil::write_json_atomic(&manifest, &serde_json::json!({"train": train, "val": val, "seed": run.config.seed}))?;
                let mut guard = link.lock().map_err(|_| Error::adapter("adapter session poisoned"))?;
                let result = adapter::train(guard.as_mut(), &manifest, train, val, run.config.seed)?;
                drop(guard);
                run.write_json("adapter-result.json", &result)?;
                println!("adapter training finished: {result}");
            } else {
                let train_corpus = corpus::ingest_with(train, opts)?;
                let val_corpus = corpus::ingest_with(val, opts)?;
                let vocab = match features {
                    Some(p) => {
                        run.input("features", p)?;
                        build_vocabulary(&corpus::ingest_with(p, opts)?, run.config.corpus.feature_min_count, 0)?
                    }
                    None => build_vocabulary(&train_corpus, run.config.corpus.feature_min_count, 0)?,
                };
                let config = classify::ClassifierConfig {
                    seed: seed::derive(run.config.seed, &[&"classifier"]),
                    ..run.config.classifier.config()
                };
                let model = classify::train_classifier(&labeled(&train_corpus), &labeled(&val_corpus), &vocab, &config)?;
                let best = &model.history[model.best_epoch - 1];
                println!("kept epoch {} of {} (validation macro-F1 {:.4})", model.best_epoch, model.history.len(), best.val_macro_f1);
                model.save(&run.output(run.out("classifier.json")))?;
            }
            "classify train"
        }
        ClassifyCommand::Eval { model, test } => {
            run.input("classifier", model)?;
            run.input("test", test)?;
            let model = ClassifierModel::load(model)?;
            let test = corpus::ingest_with(test, opts)?;
            let texts: Vec<&str> = test.iter().map(|d| d.norm_text.as_str()).collect();
            let predicted = classify::predict_windows(&model, &texts, seed::derive(run.config.seed, &[&"test-windows"]));
            let gold: Vec<&str> = test.iter().map(|d| d.genre.as_str()).collect();
            let f1 = evaluate::macro_f1(&predicted, &gold, &model.genres)?;
            let rows: Vec<serde_json::Value> = test
                .iter()
                .zip(&predicted)
                .map(|(d, p)| serde_json::json!({"id": d.id, "gold": d.genre, "predicted": p}))
                .collect();
            write_jsonl(&run.output(run.out("predictions.jsonl")), &rows)?;
            run.write_json("eval.json", &serde_json::json!({"documents": test.len(), "macro_f1": f1}))?;
            println!("macro-F1 {f1:.4} over {} documents", test.len());
            "classify eval"
        }
    };
    Ok(name)
}

fn print_report(report: &ExperimentReport) {
    println!("{}", report.table());
    for c in &report.comparisons {
        println!(
            "N={:<5} {} vs {}: {:+.2} points, t = {:.3}, p = {:.4}",
            c.n_train,
            c.a,
            c.b,
            100.0 * c.test.mean_difference,
            c.test.t,
            c.test.p
        );
    }
    for f in &report.failures {
        println!("failed: topic {} N={} {} seed {}: {}", f.topic, f.n_train, f.condition, f.seed, f.error);
    }
}

fn report(run: &mut Run) -> Result<&'static str> {
    let report = experiment::run_experiment(run.config, run.adapter()?)?;
    print_report(&report);
    for f in ["report.csv", "report.json", "table.txt", "manifest.json"] {
        run.output(run.out(f));
    }
    Ok("report")
}

/// `N+M` or `N+M:condition`.
fn parse_mix_row(s: &str) -> Result<MixRow> {
    let bad = || Error::Config(format!("mix row {s:?} is not of the form N+M or N+M:condition"));
    let (counts, condition) = match s.split_once(':') {
        Some((c, cond)) => (c, cond.parse::<Condition>()?),
        None => (s, Condition::AugAdapt),
    };
    let (a, b) = counts.split_once('+').ok_or_else(bad)?;
    Ok(MixRow {
        n_original: a.trim().parse().map_err(|_| bad())?,
        n_synthetic: b.trim().parse().map_err(|_| bad())?,
        condition,
    })
}

fn default_mix_rows(n: usize) -> Vec<MixRow> {
    let row = |n_original, n_synthetic, condition| MixRow { n_original, n_synthetic, condition };
    vec![
        row(n, 0, Condition::AugAdapt),
        row(n, n, Condition::AugAdapt),
        row(n, n, Condition::AugBaseline),
        row(n, n, Condition::Shuffled),
        row(n, 3 * n, Condition::AugAdapt),
        row(0, n, Condition::AugAdapt),
    ]
}

fn print_sweep(points: &[SweepPoint]) {
    for p in points {
        println!("{:<28} F1 {:.2}", p.label, 100.0 * p.mean_f1);
    }
}

fn prepared_for(run: &Run, conditions: Vec<Condition>) -> Result<Prepared> {
    let config = ExperimentConfig {
        conditions,
        ..run.config.clone()
    };
    let mut prepared = experiment::prepare(&config)?;
    prepared.adapter = run.adapter()?;
    Ok(prepared)
}

fn ablate(run: &mut Run, command: &AblateCommand) -> Result<&'static str> {
    let config = run.config;
    let seeds = config.run_seeds();
    let name = match command {
        AblateCommand::Keywords { limits } => {
            let prepared = prepared_for(run, vec![Condition::AugAdapt])?;
            let grid = prepared.grid(config.jobs)?;
            let cells: Vec<Cell> = grid.iter().map(|c| c.cell(&prepared)).collect();
            let points = evaluate::keyword_sweep(&cells, limits, &config.generator(), &prepared.settings()?, &seeds, config.jobs)?;
            print_sweep(&points);
            let path = run.output(run.out("keyword_sweep.json"));
            evaluate::write_plot_data(&path, "keywords", &points)?;
            run.write_json("keyword_sweep.cells.json", &points)?;
            "ablate keywords"
        }
        AblateCommand::Mix { rows } => {
            let rows = if rows.is_empty() {
                default_mix_rows(config.split.n_train[0])
            } else {
                rows.iter().map(|r| parse_mix_row(r)).collect::<Result<_>>()?
            };
            let prepared = prepared_for(run, vec![Condition::AugAdapt])?;
            let grid = prepared.grid(config.jobs)?;
            let cells: Vec<Cell> = grid.iter().map(|c| c.cell(&prepared)).collect();
            let points = evaluate::mix_sweep(&cells, &rows, &prepared.settings()?, &seeds, config.jobs)?;
            print_sweep(&points);
            let path = run.output(run.out("mix_sweep.json"));
            evaluate::write_plot_data(&path, "mix", &points)?;
            run.write_json("mix_sweep.cells.json", &points)?;
            "ablate mix"
        }
        AblateCommand::Shuffle => {
            let shuffled = ExperimentConfig {
                conditions: vec![Condition::OffTopic, Condition::AugAdapt, Condition::Shuffled],
                ..config.clone()
            };
            let report = experiment::run_experiment(&shuffled, run.adapter()?)?;
            print_report(&report);
            for f in ["report.csv", "report.json", "table.txt", "manifest.json"] {
                run.output(run.out(f));
            }
            "ablate shuffle"
        }
    };
    Ok(name)
}

/// An explicit `--seed` picks the corpus; otherwise the configured planted
/// seed does, as in experiments.
fn synthkit_make(run: &mut Run, bias: Option<f64>, docs_per_genre: Option<usize>, seed: Option<u64>) -> Result<&'static str> {
    let mut spec = run.config.corpus.planted.clone();
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(b) = bias {
        spec.bias = b;
    }
    if let Some(n) = docs_per_genre {
        spec.docs_per_genre = n;
    }
    let (corpus, truth) = synthkit::make_biased_corpus(&spec)?;
    let path = run.output(run.out("corpus.jsonl"));
    let sidecar = synthkit::write_planted(&corpus, &truth, &path)?;
    run.output(sidecar);
    println!("{} documents, {} genres, {} topics, bias {}", corpus.len(), spec.genres, spec.topics, spec.bias);
    Ok("synthkit make")
}
