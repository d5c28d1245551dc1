//! Property tests for invariants that hold for every input.

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use topicshift::classify::{loss_and_gradient, Example, Parameters};
use topicshift::corpus::{Corpus, Document, Vocabulary};
use topicshift::evaluate::macro_f1;
use topicshift::keywords::{extract_keywords, KeywordLimit};
use topicshift::splits::{build_transfer_split, CorpusScores, SplitSpec};
use topicshift::synthkit::planted_word;
use topicshift::topics::{infer_tokens, DocTopicScores, TopicModel};

fn simplex(weights: &[f64]) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    weights.iter().map(|w| w / s).collect()
}

fn model(k: usize, v: usize, weights: &[f64]) -> TopicModel {
    let vocab = Vocabulary::from_words((0..v).map(planted_word)).unwrap();
    let rows: Vec<f64> = weights[..k * v].chunks(v).flat_map(simplex).collect();
    TopicModel::new(vocab, rows, 0.1, 0.01).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn keywords_are_an_ordered_subsequence_nested_in_m(
        word_weights in weights(4 * 12),
        theta in weights(4),
        words in proptest::collection::vec(0usize..16, 1..40),
        m in 1usize..12,
    ) {
        let model = model(4, 12, &word_weights);
        let theta = DocTopicScores::new(simplex(&theta)).unwrap();
        let text: Vec<String> = words.iter().map(|&w| planted_word(w)).collect();
        let doc = Document::new("d", "g", text.join(" "));
        let small = extract_keywords(&doc, &model, &theta, KeywordLimit::Top(m)).unwrap();
        let large = extract_keywords(&doc, &model, &theta, KeywordLimit::Top(m + 1)).unwrap();

        let distinct: HashSet<&String> = small.tokens.iter().collect();
        prop_assert!(distinct.len() <= m);
        prop_assert_eq!(distinct.len(), small.distinct_count);
        // every occurrence of a chosen word is kept, in document order
        let expected: Vec<&String> = text.iter().filter(|t| distinct.contains(t)).collect();
        prop_assert_eq!(small.tokens.iter().collect::<Vec<_>>(), expected);
        let wider: HashSet<&String> = large.tokens.iter().collect();
        prop_assert!(distinct.is_subset(&wider));
    }

    #[test]
    fn splits_are_disjoint_balanced_and_ordered_by_theta(
        thetas in proptest::collection::vec(weights(3), 2 * 14),
        n_train in 1usize..4,
        n_test in 1usize..4,
    ) {
        let spec = SplitSpec { topic: 1, n_train, n_val: 2, n_test, n_on_val: 1, seed: 0 };
        let mut docs = Vec::new();
        let mut scores = BTreeMap::new();
        for (i, w) in thetas.iter().enumerate() {
            let id = format!("d{i:02}");
            docs.push(Document::new(id.clone(), format!("G{}", i % 2), "w"));
            scores.insert(id, DocTopicScores::new(simplex(w)).unwrap());
        }
        let corpus = Corpus::new(docs).unwrap();
        let table = CorpusScores { scores, unscorable: Vec::new(), model_hash: String::new() };
        let split = build_transfer_split(&corpus, &table, &spec).unwrap();
        split.validate().unwrap();
        for genre in split.genres() {
            let theta = |id: &String| table.scores[id].theta[1];
            let on_min = split.on_train[genre].iter().chain(&split.on_test[genre]).map(theta).fold(f64::INFINITY, f64::min);
            let off_max = split.off_train[genre].iter().map(theta).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(on_min >= off_max);
        }
    }

    #[test]
    fn macro_f1_is_a_bounded_score_maximal_on_agreement(
        labels in proptest::collection::vec((0usize..4, 0usize..4), 1..50),
    ) {
        let genres: Vec<String> = (0..4).map(|g| format!("G{g}")).collect();
        let pred: Vec<String> = labels.iter().map(|l| genres[l.0].clone()).collect();
        let gold: Vec<String> = labels.iter().map(|l| genres[l.1].clone()).collect();
        let f = macro_f1(&pred, &gold, &genres).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        let present: HashSet<&String> = gold.iter().collect();
        let perfect = macro_f1(&gold, &gold, &genres).unwrap();
        prop_assert!((perfect - present.len() as f64 / genres.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn fold_in_theta_is_a_distribution(
        word_weights in weights(3 * 10),
        tokens in proptest::collection::vec(0usize..10, 1..60),
        seed in any::<u64>(),
    ) {
        let model = model(3, 10, &word_weights);
        let theta = infer_tokens(&model, &tokens, 10, seed);
        prop_assert!(theta.theta.iter().all(|t| *t > 0.0));
        prop_assert!((theta.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classifier_probabilities_and_loss_are_well_formed(
        w in proptest::collection::vec(-20.0f64..20.0, 3 * 5),
        x in proptest::collection::vec((0usize..5, 0.0f64..1.0), 1..5),
        y in 0usize..3,
    ) {
        let mut params = Parameters::zeros(3, 5);
        params.weights = w;
        let p = params.probabilities(&x);
        prop_assert!(p.iter().all(|q| q.is_finite() && *q >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (loss, grad) = loss_and_gradient(&params, &[Example { x, y }], 0.0);
        prop_assert!(loss.is_finite() && loss >= 0.0);
        // softmax gradients of the bias sum to zero
        prop_assert!(grad.bias.iter().sum::<f64>().abs() < 1e-9);
    }
}
