//! Bag-of-words multinomial logistic-regression genre classifier.
//!
//! Features are in-vocabulary token counts scaled to unit L2 norm. Training
//! is mini-batch gradient descent on L2-regularized cross-entropy; after each
//! epoch the model is scored on a validation set by macro-F1 and the best
//! epoch's parameters are kept.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokens, Vocabulary, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::evaluate::macro_f1;
use crate::fsutil;
use crate::seed;
use crate::topics::etm::softmax;

/// Sparse in-vocabulary token counts, sorted by word index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub counts: Vec<(usize, u32)>,
}

/// Sparse real-valued feature vector, sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

impl FeatureVector {
    fn from_indices(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        let mut counts: Vec<(usize, u32)> = Vec::new();
        for i in idx {
            match counts.last_mut() {
                Some((j, c)) if *j == i => *c += 1,
                _ => counts.push((i, 1)),
            }
        }
        FeatureVector { counts }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts scaled to unit Euclidean norm (empty stays empty).
    pub fn normalized(&self) -> SparseVec {
        let norm = self.counts.iter().map(|&(_, c)| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        self.counts.iter().map(|&(i, c)| (i, c as f64 / norm)).collect()
    }
}

/// Count in-vocabulary tokens of a normalized text; unknown tokens are dropped.
pub fn featurize(text: &str, vocab: &Vocabulary) -> FeatureVector {
    FeatureVector::from_indices(tokens(text).filter_map(|t| vocab.index_of(t)).collect())
}

#[derive(Debug, Clone)]
struct Token {
    start: usize,
    len: usize,
    byte: usize,
    index: Option<usize>,
}

/// A normalized text split into tokens once, so that random windows can be
/// featurized without re-tokenizing. Produces exactly what [`featurize`]
/// gives on the window text.
#[derive(Debug, Clone)]
pub struct WindowedText {
    text: String,
    tokens: Vec<Token>,
    chars: usize,
}

impl WindowedText {
    pub fn new(norm_text: &str, vocab: &Vocabulary) -> Self {
        let mut toks = Vec::new();
        let mut chars = 0;
        let mut current: Option<Token> = None;
        for (byte, ch) in norm_text.char_indices() {
            if ch.is_whitespace() {
                toks.extend(current.take());
            } else {
                current.get_or_insert(Token { start: chars, len: 0, byte, index: None }).len += 1;
            }
            chars += 1;
        }
        toks.extend(current);
        for t in &mut toks {
            let end = t.byte + norm_text[t.byte..].chars().take(t.len).map(char::len_utf8).sum::<usize>();
            t.index = vocab.index_of(&norm_text[t.byte..end]);
        }
        WindowedText {
            text: norm_text.to_owned(),
            tokens: toks,
            chars,
        }
    }

    pub fn char_len(&self) -> usize {
        self.chars
    }

    /// Features of the `width`-character window starting at character `start`.
    pub fn features_at(&self, start: usize, width: usize, vocab: &Vocabulary) -> FeatureVector {
        let end = start + width;
        let first = self.tokens.partition_point(|t| t.start + t.len <= start);
        let mut idx = Vec::new();
        for t in self.tokens[first..].iter().take_while(|t| t.start < end) {
            if t.start >= start && t.start + t.len <= end {
                idx.extend(t.index);
            } else {
                // cut by the window edge: look up the visible fragment
                let skip = start.saturating_sub(t.start);
                let take = (t.start + t.len).min(end) - t.start.max(start);
                let fragment: String = self.text[t.byte..].chars().skip(skip).take(take).collect();
                idx.extend(vocab.index_of(&fragment));
            }
        }
        FeatureVector::from_indices(idx)
    }

    /// Features of a uniformly positioned window, drawing the offset exactly
    /// as [`crate::corpus::window_of`] does.
    pub fn sample<R: Rng + ?Sized>(&self, width: usize, vocab: &Vocabulary, rng: &mut R) -> FeatureVector {
        assert!(width >= 1, "window width must be at least 1");
        if self.chars <= width {
            return self.features_at(0, self.chars, vocab);
        }
        let start = rng.gen_range(0..=self.chars - width);
        self.features_at(start, width, vocab)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: SparseVec,
    pub y: usize,
}

/// Weights (genres × features, row-major) and per-genre biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub genres: usize,
    pub features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Parameters {
    pub fn zeros(genres: usize, features: usize) -> Self {
        Parameters {
            genres,
            features,
            weights: vec![0.0; genres * features],
            bias: vec![0.0; genres],
        }
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        (0..self.genres)
            .map(|g| {
                let row = &self.weights[g * self.features..(g + 1) * self.features];
                self.bias[g] + x.iter().map(|&(i, v)| row[i] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[(usize, f64)]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|w| w.is_finite())
    }
}

fn cross_entropy(p: &[f64], y: usize) -> f64 {
    -p[y].max(f64::MIN_POSITIVE).ln()
}

/// Mean cross-entropy over `examples` plus `l2 / 2 · ‖W‖²` (biases are not
/// regularized), and its gradient.
pub fn loss_and_gradient(params: &Parameters, examples: &[Example], l2: f64) -> (f64, Parameters) {
    let mut grad = Parameters::zeros(params.genres, params.features);
    let mut loss = 0.0;
    let n = examples.len().max(1) as f64;
    for ex in examples {
        let p = params.probabilities(&ex.x);
        loss += cross_entropy(&p, ex.y);
        for (g, &pg) in p.iter().enumerate() {
            let d = (pg - if g == ex.y { 1.0 } else { 0.0 }) / n;
            grad.bias[g] += d;
            for &(i, v) in &ex.x {
                grad.weights[g * params.features + i] += d * v;
            }
        }
    }
    loss /= n;
    loss += 0.5 * l2 * params.weights.iter().map(|w| w * w).sum::<f64>();
    for (gw, w) in grad.weights.iter_mut().zip(&params.weights) {
        *gw += l2 * w;
    }
    (loss, grad)
}

/// Largest learning rate for which full-batch gradient descent is guaranteed
/// not to increase the loss. Unit-norm features plus the bias input bound the
/// cross-entropy curvature by 1, so the loss is `(1 + l2)`-smooth.
pub fn stability_threshold(l2: f64) -> f64 {
    1.0 / (1.0 + l2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Window width in characters; 0 uses whole documents.
    pub window: usize,
    /// Draw a new window per document every epoch instead of once.
    pub fresh_windows: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 0.9,
            l2: 1e-4,
            epochs: 100,
            batch_size: 32,
            window: DEFAULT_WINDOW,
            fresh_windows: true,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::Config("learning rate must be positive and l2 non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        Ok(())
    }

    fn width(&self, chars: usize) -> usize {
        if self.window == 0 {
            chars.max(1)
        } else {
            self.window
        }
    }
}

/// A normalized text and its genre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledText<'a> {
    pub text: &'a str,
    pub genre: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss, each batch evaluated before its update.
    pub train_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub genre: String,
    /// Per-genre probabilities in model genre order.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub genres: Vec<String>,
    pub vocabulary: Vocabulary,
    pub params: Parameters,
    pub config: ClassifierConfig,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl ClassifierModel {
    /// An untrained model with all-zero parameters.
    pub fn zeros(genres: Vec<String>, vocabulary: Vocabulary, config: ClassifierConfig) -> Self {
        let params = Parameters::zeros(genres.len(), vocabulary.len());
        ClassifierModel {
            genres,
            vocabulary,
            params,
            config,
            best_epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn predict_features(&self, x: &[(usize, f64)]) -> Prediction {
        let scores = self.params.probabilities(x);
        let mut best = 0;
        for (g, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = g;
            }
        }
        Prediction {
            genre: self.genres[best].clone(),
            scores,
        }
    }

    /// Classify a whole normalized text.
    pub fn predict(&self, text: &str) -> Prediction {
        self.predict_features(&featurize(text, &self.vocabulary).normalized())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_json_atomic(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: ClassifierModel = fsutil::read_json(path)?;
        let p = &model.params;
        if p.genres != model.genres.len()
            || p.features != model.vocabulary.len()
            || p.weights.len() != p.genres * p.features
            || p.bias.len() != p.genres
        {
            return Err(Error::Shape("classifier parameters do not match genres and vocabulary".into()));
        }
        if !p.is_finite() {
            return Err(Error::Integrity("classifier has non-finite weights".into()));
        }
        Ok(model)
    }
}

/// Classify one random window per text, drawn from `seed`.
pub fn predict_windows(model: &ClassifierModel, texts: &[&str], seed: u64) -> Vec<String> {
    let mut rng = seed::rng(seed);
    texts
        .iter()
        .map(|t| {
            let w = WindowedText::new(t, &model.vocabulary);
            let width = model.config.width(w.char_len());
            model.predict_features(&w.sample(width, &model.vocabulary, &mut rng).normalized()).genre
        })
        .collect()
}

fn genre_index(genres: &[String], g: &str) -> Result<usize> {
    genres
        .binary_search_by(|x| x.as_str().cmp(g))
        .map_err(|_| Error::Config(format!("genre {g:?} does not occur in the training set")))
}

/// Train with validation-based early stopping; see the module docs.
pub fn train_classifier(
    train: &[LabeledText],
    val: &[LabeledText],
    vocab: &Vocabulary,
    config: &ClassifierConfig,
) -> Result<ClassifierModel> {
    config.validate()?;
    let genres: Vec<String> = train
        .iter()
        .map(|d| d.genre.to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if genres.len() < 2 {
        return Err(Error::Config(format!(
            "training set needs at least two genres, found {}",
            genres.len()
        )));
    }
    if val.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let labels: Vec<usize> = train.iter().map(|d| genre_index(&genres, d.genre)).collect::<Result<_>>()?;
    let val_gold: Vec<&str> = val.iter().map(|d| d.genre).collect();
    for g in &val_gold {
        genre_index(&genres, g)?;
    }

    let docs: Vec<WindowedText> = train.iter().map(|d| WindowedText::new(d.text, vocab)).collect();
    let mut model = ClassifierModel::zeros(genres.clone(), vocab.clone(), config.clone());
    let val_texts: Vec<&str> = val.iter().map(|d| d.text).collect();
    let val_seed = seed::derive(config.seed, &[&"val-windows"]);
    let mut val_x: Vec<SparseVec> = Vec::with_capacity(val.len());
    {
        let mut rng = seed::rng(val_seed);
        for t in &val_texts {
            let w = WindowedText::new(t, vocab);
            val_x.push(w.sample(config.width(w.char_len()), vocab, &mut rng).normalized());
        }
    }

    let mut rng = seed::rng(seed::derive(config.seed, &[&"train"]));
    let mut examples: Vec<Example> = Vec::new();
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut best: Option<(f64, Parameters, usize)> = None;
    let (g_count, v) = (genres.len(), vocab.len());
    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        if epoch == 1 || config.fresh_windows {
            examples = docs
                .iter()
                .zip(&labels)
                .map(|(d, &y)| Example {
                    x: d.sample(config.width(d.char_len()), vocab, &mut rng).normalized(),
                    y,
                })
                .collect();
        }
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let p = &mut model.params;
            probs.clear();
            let mut batch_loss = 0.0;
            for &i in batch {
                let pr = p.probabilities(&examples[i].x);
                batch_loss += cross_entropy(&pr, examples[i].y);
                probs.push(pr);
            }
            let reg: f64 = 0.5 * config.l2 * p.weights.iter().map(|w| w * w).sum::<f64>();
            loss_sum += batch_loss / batch.len() as f64 + reg;
            batches += 1;

            let step = config.learning_rate / batch.len() as f64;
            let decay = 1.0 - config.learning_rate * config.l2;
            if decay != 1.0 {
                p.weights.iter_mut().for_each(|w| *w *= decay);
            }
            for (&i, pr) in batch.iter().zip(&probs) {
                let ex = &examples[i];
                for g in 0..g_count {
                    let d = step * (pr[g] - if g == ex.y { 1.0 } else { 0.0 });
                    p.bias[g] -= d;
                    let row = &mut p.weights[g * v..(g + 1) * v];
                    for &(j, x) in &ex.x {
                        row[j] -= d * x;
                    }
                }
            }
        }
        let train_loss = loss_sum / batches as f64;
        if !train_loss.is_finite() || !model.params.is_finite() {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        let predicted: Vec<String> = val_x.iter().map(|x| model.predict_features(x).genre).collect();
        let pred_refs: Vec<&str> = predicted.iter().map(String::as_str).collect();
        let f1 = macro_f1(&pred_refs, &val_gold, &genres)?;
        log::debug!("epoch {epoch}: loss {train_loss:.5}, val macro-F1 {f1:.4}");
        model.history.push(EpochRecord {
            epoch,
            train_loss,
            val_macro_f1: f1,
        });
        if best.as_ref().map_or(true, |(b, _, _)| f1 > *b) {
            best = Some((f1, model.params.clone(), epoch));
        }
    }
    let (_, params, epoch) = best.expect("at least one epoch");
    model.params = params;
    model.best_epoch = epoch;
    Ok(model)
}
