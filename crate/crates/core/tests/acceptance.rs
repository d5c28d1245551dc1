//! Acceptance suite: one PASS/FAIL line per criterion, then a summary.
//! Exits non-zero when any criterion fails.
//!
//! ```text
//! cargo test --release -p topicshift --test acceptance
//! ```

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::Rng;
use topicshift::classify::{loss_and_gradient, Example, Parameters};
use topicshift::corpus::{build_vocabulary, Corpus, Document, Vocabulary};
use topicshift::evaluate::{keyword_sweep, macro_f1, Cell, Condition, ExperimentReport};
use topicshift::experiment::{prepare, run_experiment, ExperimentConfig};
use topicshift::keywords::{extract_keywords, score_word, KeywordLimit};
use topicshift::seed;
use topicshift::splits::{build_transfer_split, CorpusScores, SplitSpec, TransferSplit};
use topicshift::synthkit::{majority_jaccard, make_biased_corpus, planted_word, two_topic_corpus, PlantedSpec, TwoTopicSpec};
use topicshift::topics::{etm_word_topic, infer_tokens, train_lda, DocTopicScores, EtmParameters, LdaConfig, TopicModel};

// Tolerances and thresholds of the criteria.
const MIN_GAP: f64 = 0.10;
const MIN_AUG_GAIN: f64 = 0.02;
const SHUFFLED_BAND: f64 = 0.01;
const BIAS0_BAND: f64 = 0.03;
const ALPHA: f64 = 0.05;
const MAX_RUNTIME: Duration = Duration::from_secs(300);
const MIN_JACCARD: f64 = 0.8;
const UNIGRAM_TOL: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-4;
const SIMPLEX_TOL: f64 = 1e-9;
const SHIFT_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_INSTANCES: usize = 100;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Outcome {
    outcome(name, false, format!("error: {e}"))
}

fn main() {
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut record = |o: Outcome| {
        println!("{} {:<22} {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        outcomes.push(o.pass);
    };

    match main_grid() {
        Ok(os) => os.into_iter().for_each(&mut record),
        Err(e) => {
            for name in ["transfer-gap", "augmentation", "shuffled-labels", "determinism"] {
                record(failed(name, &e));
            }
        }
    }
    record(keyword_count_sweep().unwrap_or_else(|e| failed("keyword-sweep", e)));
    record(bias_zero_control().unwrap_or_else(|e| failed("bias-zero-control", e)));
    record(lda_recovery().unwrap_or_else(|e| failed("lda-recovery", e)));
    record(numerical_checks());
    record(oracle_equivalence());

    let passed = outcomes.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed in {:.1}s", outcomes.len(), start.elapsed().as_secs_f64());
    if passed != outcomes.len() {
        std::process::exit(1);
    }
}

fn diff_p(report: &ExperimentReport, a: Condition, b: Condition, n: usize) -> (f64, f64) {
    let c = report.comparison(a, b, n).expect("comparison present");
    (c.test.mean_difference, c.test.p)
}

/// The default experiment with the shuffled-label ablation, run twice.
fn main_grid() -> topicshift::Result<Vec<Outcome>> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let config = ExperimentConfig {
        out: dir.path().join("first"),
        conditions: vec![Condition::OnTopic, Condition::OffTopic, Condition::AugBaseline, Condition::AugAdapt, Condition::Shuffled],
        jobs: 1,
        ..ExperimentConfig::default()
    };
    let n = config.split.n_train[0];
    let t = Instant::now();
    let report = run_experiment(&config, None)?;
    let elapsed = t.elapsed();
    let mut out = Vec::new();

    let (gap, p) = diff_p(&report, Condition::OnTopic, Condition::OffTopic, n);
    out.push(outcome(
        "transfer-gap",
        gap >= MIN_GAP && p < ALPHA && elapsed <= MAX_RUNTIME,
        format!("on - off = {:+.2} points (need >= {:.0}), p = {p:.2e}, grid runtime {:.0}s (limit {}s)", 100.0 * gap, 100.0 * MIN_GAP, elapsed.as_secs_f64(), MAX_RUNTIME.as_secs()),
    ));

    let (gain, p_off) = diff_p(&report, Condition::AugAdapt, Condition::OffTopic, n);
    let (edge, p_base) = diff_p(&report, Condition::AugAdapt, Condition::AugBaseline, n);
    out.push(outcome(
        "augmentation",
        gain >= MIN_AUG_GAIN && p_off < ALPHA && edge > 0.0 && p_base < ALPHA,
        format!("adapt - off = {:+.2} points, p = {p_off:.4}; adapt - baseline = {:+.2} points, p = {p_base:.4}", 100.0 * gain, 100.0 * edge),
    ));

    let (shift, p) = diff_p(&report, Condition::Shuffled, Condition::OffTopic, n);
    out.push(outcome(
        "shuffled-labels",
        shift.abs() <= SHUFFLED_BAND,
        format!("shuffled - off = {:+.2} points (band ±{:.0}), p = {p:.4}", 100.0 * shift, 100.0 * SHUFFLED_BAND),
    ));

    let again = ExperimentConfig {
        out: dir.path().join("second"),
        ..config.clone()
    };
    run_experiment(&again, None)?;
    let read = |c: &ExperimentConfig| std::fs::read(c.out.join("report.csv")).expect("report.csv written");
    let (a, b) = (read(&config), read(&again));
    out.push(outcome(
        "determinism",
        a == b,
        format!("report.csv {} bytes, rerun {}", a.len(), if a == b { "byte-identical" } else { "differs" }),
    ));
    Ok(out)
}

fn keyword_count_sweep() -> topicshift::Result<Outcome> {
    let config = ExperimentConfig {
        conditions: vec![Condition::AugAdapt],
        ..ExperimentConfig::default()
    };
    let prepared = prepare(&config)?;
    let grid = prepared.grid(1)?;
    let cells: Vec<Cell> = grid.iter().map(|c| c.cell(&prepared)).collect();
    let limits = [KeywordLimit::Top(1), KeywordLimit::Top(10), KeywordLimit::All];
    let points = keyword_sweep(&cells, &limits, &config.generator(), &prepared.settings()?, &config.run_seeds(), 1)?;
    let f: Vec<f64> = points.iter().map(|p| p.mean_f1).collect();
    Ok(outcome(
        "keyword-sweep",
        f[1] > f[0] && f[1] > f[2],
        format!("F1(m=1) {:.2}, F1(m=10) {:.2}, F1(m=all) {:.2}", 100.0 * f[0], 100.0 * f[1], 100.0 * f[2]),
    ))
}

fn bias_zero_control() -> topicshift::Result<Outcome> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut config = ExperimentConfig {
        out: dir.path().to_path_buf(),
        conditions: vec![Condition::OnTopic, Condition::OffTopic],
        ..ExperimentConfig::default()
    };
    config.corpus.planted.bias = 0.0;
    let report = run_experiment(&config, None)?;
    let (gap, p) = diff_p(&report, Condition::OnTopic, Condition::OffTopic, config.split.n_train[0]);
    Ok(outcome(
        "bias-zero-control",
        gap.abs() <= BIAS0_BAND,
        format!("on - off = {:+.2} points at bias 0 (band ±{:.0}), p = {p:.4}", 100.0 * gap, 100.0 * BIAS0_BAND),
    ))
}

fn lda_recovery() -> topicshift::Result<Outcome> {
    let (corpus, planted) = two_topic_corpus(&TwoTopicSpec::default());
    let vocab = build_vocabulary(&corpus, 1, 0)?;
    let model = train_lda(&corpus, &vocab, &LdaConfig { k: 2, ..LdaConfig::default() })?;
    // learned top-10 against each topic's planted top-10 (its core words)
    let top = TwoTopicSpec::default().core_words;
    let learned: Vec<Vec<&str>> = (0..2).map(|t| model.top_words(t, top)).collect::<Result<_, _>>()?;
    let planted: Vec<Vec<&str>> = planted.iter().map(|p| p[..top].iter().map(String::as_str).collect()).collect();
    let jaccard = majority_jaccard(&learned, &planted);
    let min_j = jaccard.iter().copied().fold(f64::INFINITY, f64::min);

    // with one topic the word distribution is the smoothed unigram
    let (small, _) = make_biased_corpus(&PlantedSpec { docs_per_genre: 25, ..PlantedSpec::default() })?;
    let vocab = build_vocabulary(&small, 1, 0)?;
    let beta = 0.01;
    let one = train_lda(&small, &vocab, &LdaConfig { k: 1, hyper_beta: beta, sweeps: 5, ..LdaConfig::default() })?;
    let mut counts = vec![0u64; vocab.len()];
    for d in &small {
        for w in vocab.encode(&d.norm_text) {
            counts[w] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let unigram_err = counts
        .iter()
        .enumerate()
        .map(|(w, &c)| ((c as f64 + beta) / (total as f64 + vocab.len() as f64 * beta) - one.score(w, 0)).abs())
        .fold(0.0, f64::max);
    Ok(outcome(
        "lda-recovery",
        min_j >= MIN_JACCARD && unigram_err <= UNIGRAM_TOL,
        format!("two-topic Jaccard {jaccard:.2?} (need >= {MIN_JACCARD}), K=1 max |Δ| vs unigram {unigram_err:.1e}"),
    ))
}

fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_unit_sparse(rng: &mut impl Rng, features: usize) -> Vec<(usize, f64)> {
    let mut x = Vec::new();
    for i in 0..features {
        if rng.gen_bool(0.4) {
            x.push((i, rng.gen_range(0.1..3.0)));
        }
    }
    if x.is_empty() {
        x.push((0, 1.0));
    }
    let norm = x.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|(_, v)| *v /= norm);
    x
}

fn numerical_checks() -> Outcome {
    let name = "numerical-checks";
    let mut rng = seed::rng(101);

    // analytic gradient vs central differences
    let mut grad_err: f64 = 0.0;
    for _ in 0..20 {
        let (g, f) = (rng.gen_range(2..5), rng.gen_range(3..12));
        let mut params = Parameters::zeros(g, f);
        params.weights = random_vec(&mut rng, g * f, 1.0);
        params.bias = random_vec(&mut rng, g, 1.0);
        let examples: Vec<Example> = (0..rng.gen_range(1..10))
            .map(|_| Example { x: random_unit_sparse(&mut rng, f), y: rng.gen_range(0..g) })
            .collect();
        let l2 = rng.gen_range(0.0..0.1);
        let (_, analytic) = loss_and_gradient(&params, &examples, l2);
        let h = 1e-5;
        let n_w = params.weights.len();
        for i in 0..n_w + g {
            let nudge = |p: &mut Parameters, d: f64| {
                if i < n_w {
                    p.weights[i] += d
                } else {
                    p.bias[i - n_w] += d
                }
            };
            let (mut up, mut down) = (params.clone(), params.clone());
            nudge(&mut up, h);
            nudge(&mut down, -h);
            let numeric = (loss_and_gradient(&up, &examples, l2).0 - loss_and_gradient(&down, &examples, l2).0) / (2.0 * h);
            let a = if i < n_w { analytic.weights[i] } else { analytic.bias[i - n_w] };
            grad_err = grad_err.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
        }
    }

    // softmax rows, classifier probabilities and fold-in theta sum to one
    let mut simplex_err: f64 = 0.0;
    let mut shift_err: f64 = 0.0;
    for _ in 0..50 {
        let (v, k, e) = (rng.gen_range(2..40), rng.gen_range(1..6), rng.gen_range(1..5));
        let params = EtmParameters {
            rho: (0..v).map(|_| random_vec(&mut rng, e, 3.0)).collect(),
            alpha: (0..k).map(|_| random_vec(&mut rng, e, 3.0)).collect(),
        };
        let rows = etm_word_topic(&params).expect("valid parameters");
        for row in &rows {
            simplex_err = simplex_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        // an extra dimension that is 1 for every word adds c_t to topic t's logits
        let shifted = EtmParameters {
            rho: params.rho.iter().map(|r| [r.as_slice(), &[1.0]].concat()).collect(),
            alpha: params.alpha.iter().map(|a| [a.as_slice(), &[rng.gen_range(-50.0..50.0)]].concat()).collect(),
        };
        let moved = etm_word_topic(&shifted).expect("valid parameters");
        for (r, m) in rows.iter().zip(&moved) {
            for (x, y) in r.iter().zip(m) {
                shift_err = shift_err.max((x - y).abs());
            }
        }

        let mut cls = Parameters::zeros(k + 1, v);
        cls.weights = random_vec(&mut rng, (k + 1) * v, 5.0);
        let p = cls.probabilities(&random_unit_sparse(&mut rng, v));
        simplex_err = simplex_err.max((p.iter().sum::<f64>() - 1.0).abs());

        let vocab = Vocabulary::from_words((0..v).map(planted_word)).expect("distinct words");
        let model = params.into_model(vocab, 0.5).expect("valid model");
        let tokens: Vec<usize> = (0..rng.gen_range(1..60)).map(|_| rng.gen_range(0..v)).collect();
        let theta = infer_tokens(&model, &tokens, 20, rng.gen());
        simplex_err = simplex_err.max((theta.theta.iter().sum::<f64>() - 1.0).abs());
    }

    outcome(
        name,
        grad_err < GRAD_REL_TOL && simplex_err <= SIMPLEX_TOL && shift_err <= SHIFT_TOL,
        format!("gradient rel. error {grad_err:.1e} (< {GRAD_REL_TOL:.0e}), simplex {simplex_err:.1e} (<= {SIMPLEX_TOL:.0e}), ETM shift {shift_err:.1e} (<= {SHIFT_TOL:.0e})"),
    )
}

/// A random row-stochastic K × V model; `coarse` draws weights from a few
/// levels so that ties are common.
fn random_model(rng: &mut impl Rng, k: usize, v: usize, coarse: bool) -> TopicModel {
    let vocab = Vocabulary::from_words((0..v).map(planted_word)).expect("distinct words");
    let mut rows = Vec::with_capacity(k * v);
    for _ in 0..k {
        let w: Vec<f64> = (0..v).map(|_| if coarse { rng.gen_range(1..4) as f64 } else { rng.gen_range(0.01..1.0) }).collect();
        let s: f64 = w.iter().sum();
        rows.extend(w.iter().map(|x| x / s));
    }
    TopicModel::new(vocab, rows, 0.1, 0.01).expect("valid model")
}

fn random_theta(rng: &mut impl Rng, k: usize, coarse: bool) -> DocTopicScores {
    let w: Vec<f64> = (0..k).map(|_| if coarse { rng.gen_range(1..3) as f64 } else { rng.gen_range(0.01..1.0) }).collect();
    let s: f64 = w.iter().sum();
    DocTopicScores::new(w.iter().map(|x| x / s).collect()).expect("simplex")
}

/// Words drawn from a pool larger than the vocabulary, so some are unknown.
fn random_doc(rng: &mut impl Rng, id: &str, v: usize) -> Document {
    let n = rng.gen_range(1..40);
    let words: Vec<String> = (0..n).map(|_| planted_word(rng.gen_range(0..v + 5))).collect();
    Document::new(id, "g", words.join(" "))
}

fn oracle_score(word: &str, doc: &Document, theta: &[f64], model: &TopicModel) -> f64 {
    let words = model.vocabulary().words();
    let Some(w) = (0..words.len()).find(|&i| words[i] == word) else {
        return 0.0;
    };
    let count = doc.norm_text.split(' ').filter(|t| *t == word).count();
    let mut per = 0.0;
    for (t, th) in theta.iter().enumerate() {
        per += th * model.row(t)[w];
    }
    count as f64 * per
}

fn oracle_keywords(doc: &Document, theta: &[f64], model: &TopicModel, m: usize) -> Vec<String> {
    let words = model.vocabulary().words();
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let s = oracle_score(w, doc, theta, model);
        if doc.norm_text.split(' ').any(|t| t == w) {
            candidates.push((i, s));
        }
    }
    // repeated arg-max selection, ties to the lower vocabulary index
    let mut chosen = Vec::new();
    while chosen.len() < m && !candidates.is_empty() {
        let mut best = 0;
        for j in 1..candidates.len() {
            if candidates[j].1 > candidates[best].1 {
                best = j;
            }
        }
        chosen.push(words[candidates.remove(best).0].clone());
    }
    doc.norm_text.split(' ').filter(|t| chosen.iter().any(|c| c == t)).map(str::to_owned).collect()
}

fn oracle_macro_f1(pred: &[String], gold: &[String], genres: &[String]) -> f64 {
    let mut total = 0.0;
    for g in genres {
        let tp = pred.iter().zip(gold).filter(|(p, y)| *p == g && *y == g).count() as f64;
        let predicted = pred.iter().filter(|p| *p == g).count() as f64;
        let actual = gold.iter().filter(|y| *y == g).count() as f64;
        if tp > 0.0 {
            let (precision, recall) = (tp / predicted, tp / actual);
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    total / genres.len() as f64
}

fn oracle_top_words(model: &TopicModel, t: usize, k: usize) -> Vec<String> {
    let row = model.row(t);
    let mut idx: Vec<usize> = (0..row.len()).collect();
    // insertion sort: higher score first, then lower index
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && (row[idx[j]] > row[idx[j - 1]] || (row[idx[j]] == row[idx[j - 1]] && idx[j] < idx[j - 1])) {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    idx.iter().take(k).map(|&i| model.vocabulary().word(i).to_owned()).collect()
}

/// Per genre: the highest-θ documents fill on_test, on_train, on_val in that
/// order; the lowest-θ remaining ones fill off_train, then off_val. Ties go
/// to the smaller id.
fn oracle_split(docs: &[(String, String, f64)], spec: &SplitSpec) -> BTreeMap<&'static str, BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<&'static str, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    let genres: std::collections::BTreeSet<&String> = docs.iter().map(|d| &d.1).collect();
    for g in genres {
        let mut mine: Vec<&(String, String, f64)> = docs.iter().filter(|d| &d.1 == g).collect();
        mine.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
        let mut cursor = 0;
        for (name, n) in [("on_test", spec.n_test), ("on_train", spec.n_train), ("on_val", spec.n_on_val)] {
            out.entry(name).or_default().insert(g.clone(), mine[cursor..cursor + n].iter().map(|d| d.0.clone()).collect());
            cursor += n;
        }
        let mut rest: Vec<&(String, String, f64)> = mine[cursor..].to_vec();
        rest.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
        let mut cursor = 0;
        for (name, n) in [("off_train", spec.n_train), ("off_val", spec.n_val)] {
            out.entry(name).or_default().insert(g.clone(), rest[cursor..cursor + n].iter().map(|d| d.0.clone()).collect());
            cursor += n;
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let mut rng = seed::rng(202);
    let mut mismatches: HashMap<&str, usize> = HashMap::new();
    let mut miss = |what: &'static str| *mismatches.entry(what).or_default() += 1;

    for i in 0..ORACLE_INSTANCES {
        let coarse = i % 2 == 0;
        let (k, v) = (rng.gen_range(1..5), rng.gen_range(2..25));
        let model = random_model(&mut rng, k, v, coarse);
        let theta = random_theta(&mut rng, k, coarse);
        let doc = random_doc(&mut rng, "d", v);

        for w in (0..v + 5).map(planted_word) {
            let (a, b) = (score_word(&w, &doc, &theta, &model), oracle_score(&w, &doc, &theta.theta, &model));
            if (a - b).abs() > ORACLE_TOL * b.abs().max(1.0) {
                miss("score_word");
            }
        }

        let m = rng.gen_range(1..v + 2);
        let expected = oracle_keywords(&doc, &theta.theta, &model, m);
        match extract_keywords(&doc, &model, &theta, KeywordLimit::Top(m)) {
            Ok(ks) if ks.tokens == expected => {}
            Err(_) if expected.is_empty() => {}
            _ => miss("extract_keywords"),
        }

        let top_k = rng.gen_range(1..v + 3);
        for t in 0..k {
            let got: Vec<String> = model.top_words(t, top_k).expect("topic in range").into_iter().map(str::to_owned).collect();
            if got != oracle_top_words(&model, t, top_k) {
                miss("top_words");
            }
        }

        let genres: Vec<String> = (0..rng.gen_range(1..5)).map(|g| format!("G{g}")).collect();
        let n = rng.gen_range(0..30);
        let gold: Vec<String> = (0..n).map(|_| genres[rng.gen_range(0..genres.len())].clone()).collect();
        let pred: Vec<String> = (0..n).map(|_| genres[rng.gen_range(0..genres.len())].clone()).collect();
        let f = macro_f1(&pred, &gold, &genres).expect("known labels");
        if (f - oracle_macro_f1(&pred, &gold, &genres)).abs() > ORACLE_TOL {
            miss("macro_f1");
        }

        let spec = SplitSpec {
            topic: rng.gen_range(0..k),
            n_train: rng.gen_range(1..4),
            n_val: rng.gen_range(1..4),
            n_test: rng.gen_range(1..4),
            n_on_val: rng.gen_range(0..3),
            seed: 0,
        };
        let per_genre = spec.required_per_genre() + rng.gen_range(0..5);
        let mut rows = Vec::new();
        let mut scores = BTreeMap::new();
        for g in 0..rng.gen_range(1..4) {
            for j in 0..per_genre {
                let id = format!("g{g}-{j:03}");
                let th = random_theta(&mut rng, k, coarse);
                rows.push((id.clone(), format!("G{g}"), th.theta[spec.topic]));
                scores.insert(id, th);
            }
        }
        let corpus = Corpus::new(rows.iter().map(|(id, g, _)| Document::new(id.clone(), g.clone(), "w")).collect()).expect("unique ids");
        let table = CorpusScores { scores, unscorable: Vec::new(), model_hash: String::new() };
        match build_transfer_split(&corpus, &table, &spec) {
            Ok(split) => {
                let expected = oracle_split(&rows, &spec);
                let same = expected.iter().all(|(name, part)| split.partition(name).is_some_and(|p| p == part));
                if !same {
                    miss("build_transfer_split");
                }
                let _: &TransferSplit = &split;
            }
            Err(_) => miss("build_transfer_split"),
        }
    }

    let total: usize = mismatches.values().sum();
    outcome(
        "oracle-equivalence",
        total == 0,
        format!(
            "{ORACLE_INSTANCES} instances each of score_word, extract_keywords, macro_f1, build_transfer_split, top_words; mismatches {:?}",
            mismatches
        ),
    )
}
