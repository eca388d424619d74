//! Span detection against brute force and overfitting oracles.

use proptest::prelude::*;
use qasrl::corpus::{AnswerSpan, ValidityPolicy};
use qasrl::dataset::{verb_instances, VerbInstance};
use qasrl::metrics::{GoldQuestion, Matcher};
use qasrl::nn::{gradient_check, EncoderConfig, GradCheckConfig, ParamStore, TrainConfig, Vocab};
use qasrl::spandet::{
    select_spans, spans_to_tags, tags_to_spans, viterbi_decode, BioNet, DetectorConfig,
    DetectorKind, ScoredSpan, SpanDetector, SpanNet, Tag,
};
use qasrl::synthetic::toy_corpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(d: &[[f64; 3]]) -> (Vec<Tag>, f64) {
    let n = d.len();
    let mut best: Option<(Vec<Tag>, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let tags: Vec<Tag> = (0..n)
            .map(|_| {
                let t = Tag::ALL[c % 3];
                c /= 3;
                t
            })
            .collect();
        let legal = tags
            .iter()
            .enumerate()
            .all(|(i, t)| t.may_follow(if i == 0 { None } else { Some(tags[i - 1]) }));
        if !legal {
            continue;
        }
        let score: f64 = tags.iter().zip(d).map(|(t, row)| row[t.index()].ln()).sum();
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((tags, score));
        }
    }
    best.unwrap()
}

fn random_distributions(rng: &mut impl Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let raw: [f64; 3] = [
                rng.random::<f64>() + 1e-3,
                rng.random::<f64>() + 1e-3,
                rng.random::<f64>() + 1e-3,
            ];
            let z: f64 = raw.iter().sum();
            raw.map(|x| x / z)
        })
        .collect()
}

#[test]
fn viterbi_equals_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..500 {
        let n = 1 + trial % 8;
        let d = random_distributions(&mut rng, n);
        let got = viterbi_decode(&d);
        let (tags, score) = brute_force(&d);
        assert_eq!(got.tags, tags, "trial {trial}");
        assert!((got.score() - score).abs() < 1e-9);
    }
}

#[test]
fn inside_dominant_first_token_resolves_by_constrained_paths() {
    for d in [
        vec![[0.35, 0.6, 0.05], [0.2, 0.1, 0.7]],
        vec![[0.1, 0.6, 0.3], [0.2, 0.1, 0.7]],
    ] {
        let (tags, _) = brute_force(&d);
        assert_eq!(viterbi_decode(&d).tags, tags);
        assert_ne!(tags[0], Tag::I);
    }
}

proptest! {
    #[test]
    fn tags_and_spans_round_trip(starts in proptest::collection::btree_set(0usize..20, 0..6), widths in proptest::collection::vec(0usize..3, 6)) {
        let mut spans = Vec::new();
        let mut last_end: Option<usize> = None;
        for (s, w) in starts.into_iter().zip(widths) {
            if last_end.is_some_and(|e| s <= e) {
                continue;
            }
            let e = (s + w).min(19);
            spans.push(AnswerSpan::new(s, e));
            last_end = Some(e);
        }
        let tags = spans_to_tags(&spans, 20).unwrap();
        prop_assert_eq!(tags_to_spans(&tags), spans);
    }

    #[test]
    fn decoded_sequences_are_legal(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tags = viterbi_decode(&random_distributions(&mut rng, n)).tags;
        for i in 0..n {
            let prev = if i == 0 { None } else { Some(tags[i - 1]) };
            prop_assert!(tags[i].may_follow(prev));
        }
    }

    #[test]
    fn selection_is_monotone(probs in proptest::collection::vec(0.0f64..=1.0, 0..30), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let scored: Vec<ScoredSpan> = probs.iter().enumerate()
            .map(|(i, &p)| ScoredSpan { span: AnswerSpan::new(i, i), probability: p }).collect();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let high = select_spans(&scored, hi).unwrap();
        let low = select_spans(&scored, lo).unwrap();
        prop_assert!(high.iter().all(|s| low.contains(s)));
    }
}

fn tiny_config(vocab: usize) -> DetectorConfig {
    DetectorConfig {
        encoder: EncoderConfig {
            vocab_size: vocab,
            word_dim: 4,
            predicate_dim: 2,
            hidden: 4,
            layers: 2,
            recurrent_dropout: 0.0,
        },
        mlp_hidden: 5,
    }
}

fn one_sentence() -> VerbInstance {
    let tokens: Vec<String> = "The mayor blamed the council ."
        .split(' ')
        .map(String::from)
        .collect();
    VerbInstance {
        sentence_id: "s".into(),
        tokens,
        verb_index: 2,
        gold: vec![GoldQuestion {
            slots: qasrl::synthetic::toy_corpus(1, 0)[0].verb_entries[0].qa_pairs[0]
                .slots
                .clone(),
            spans: vec![AnswerSpan::new(3, 4)],
        }],
    }
}

#[test]
fn zero_weight_heads_are_uninformative() {
    let inst = one_sentence();
    let vocab = Vocab::from_tokens(inst.tokens.iter().map(String::as_str));
    for kind in [DetectorKind::Bio, DetectorKind::Span] {
        let mut det = SpanDetector::new(kind, tiny_config(0), vocab.clone(), 1).unwrap();
        let ids: Vec<_> = det
            .params
            .ids()
            .filter(|&id| {
                det.params.name(id).starts_with("bio") || det.params.name(id).starts_with("span")
            })
            .collect();
        for id in ids {
            det.params
                .get_mut(id)
                .data
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
        match kind {
            DetectorKind::Bio => {
                for row in det.tag_distributions(&inst.tokens, 2).unwrap() {
                    for p in row {
                        assert!((p - 1.0 / 3.0).abs() < 1e-6);
                    }
                }
            }
            DetectorKind::Span => {
                let scored = det.score(&inst.tokens, 2).unwrap();
                assert_eq!(scored.len(), 21);
                assert!(scored.iter().all(|s| s.probability == 0.5));
            }
        }
    }
}

#[test]
fn hand_set_logits_give_closed_form_softmax() {
    let p = qasrl::nn::softmax(&[2.0f64, 0.0, 0.0]);
    let e2 = 2f64.exp();
    assert!((p[0] - e2 / (e2 + 2.0)).abs() < 1e-12 && (p[1] - 1.0 / (e2 + 2.0)).abs() < 1e-12);
}

#[test]
fn span_model_memorizes_one_sentence() {
    let inst = one_sentence();
    let vocab = Vocab::from_tokens(inst.tokens.iter().map(String::as_str));
    let mut det = SpanDetector::new(DetectorKind::Span, tiny_config(0), vocab, 3).unwrap();
    let config = TrainConfig {
        max_epochs: 3000,
        patience: 3000,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let report = det
        .train(std::slice::from_ref(&inst), &[], &config)
        .unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.train_loss).collect();
    assert!(losses[10] < losses[0], "{:?}", &losses[..11]);
    for s in det.score(&inst.tokens, 2).unwrap() {
        if s.span == AnswerSpan::new(3, 4) {
            assert!(s.probability > 0.99, "{s:?}");
        } else {
            assert!(s.probability < 0.01, "{s:?}");
        }
    }
}

#[test]
fn bio_and_span_heads_pass_gradient_checks() {
    let inst = one_sentence();
    let ids = [1usize, 2, 3, 1, 4, 5];
    let config = tiny_config(6);
    let tags = spans_to_tags(&inst.gold[0].spans, ids.len()).unwrap();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::<f64>::new();
        let bio = BioNet::build(&mut store, &config, &mut rng).unwrap();
        let report = gradient_check(
            &store,
            |g| bio.loss(g, &ids, 2, &tags, None),
            &GradCheckConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed && report.checked >= 20, "{report:?}");

        let mut store = ParamStore::<f64>::new();
        let span = SpanNet::build(&mut store, &config, &mut rng).unwrap();
        let report = gradient_check(
            &store,
            |g| span.loss(g, &ids, 2, &inst.gold[0].spans, None),
            &GradCheckConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed && report.checked >= 20, "{report:?}");
    }
}

#[test]
fn checkpoint_round_trip_preserves_scores() {
    let corpus = toy_corpus(3, 1);
    let inst = &verb_instances(&corpus, &ValidityPolicy::default())[0];
    let vocab = Vocab::from_tokens(
        corpus
            .iter()
            .flat_map(|r| r.tokens.iter().map(String::as_str)),
    );
    let det = SpanDetector::new(DetectorKind::Span, tiny_config(0), vocab, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("span.ckpt");
    det.save(&path).unwrap();
    let back = SpanDetector::load(&path).unwrap();
    assert_eq!(
        back.score(&inst.tokens, inst.verb_index).unwrap(),
        det.score(&inst.tokens, inst.verb_index).unwrap()
    );
    let prf = back
        .evaluate(std::slice::from_ref(inst), 0.5, &Matcher::exact())
        .unwrap();
    assert!((0.0..=1.0).contains(&prf.f1));
}
