use std::collections::BTreeSet;
use std::sync::OnceLock;

use qasrl::corpus::{AnswerSpan, SentenceRecord, ValidityPolicy};
use qasrl::dataset::{verb_instances, VerbInstance};
use qasrl::expand::{filter_candidates, overgenerate, Provenance};
use qasrl::grammar::{Grammar, QuestionSlots};
use qasrl::nn::Vocab;
use qasrl::parser::{cut, cutoff_for_questions_per_verb, questions_per_verb, Parser};
use qasrl::qgen::{QgenKind, QuestionGenerator};
use qasrl::spandet::{DetectorKind, SpanDetector};
use qasrl::synthetic::{toy_corpus, toy_detector_config, toy_qgen_config, toy_train_config};

struct Models {
    corpus: Vec<SentenceRecord>,
    detector: SpanDetector,
    generator: QuestionGenerator,
}

fn models() -> &'static Models {
    static MODELS: OnceLock<Models> = OnceLock::new();
    MODELS.get_or_init(|| {
        let corpus = toy_corpus(50, 7);
        let instances = verb_instances(&corpus, &ValidityPolicy::default());
        let vocab = Vocab::from_tokens(
            corpus
                .iter()
                .flat_map(|r| r.tokens.iter().map(String::as_str)),
        );
        let mut detector =
            SpanDetector::new(DetectorKind::Span, toy_detector_config(0), vocab.clone(), 3)
                .unwrap();
        detector
            .train(&instances, &instances, &toy_train_config(3))
            .unwrap();
        let mut generator =
            QuestionGenerator::new(QgenKind::Sequential, toy_qgen_config(0), vocab, 5).unwrap();
        generator
            .train(&instances, &instances, &toy_train_config(5))
            .unwrap();
        Models {
            corpus,
            detector,
            generator,
        }
    })
}

fn gold_items(instance: &VerbInstance) -> BTreeSet<(QuestionSlots, AnswerSpan)> {
    instance
        .gold
        .iter()
        .flat_map(|q| q.spans.iter().map(move |s| (q.slots.clone(), *s)))
        .collect()
}

#[test]
fn memorized_models_reproduce_gold() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    for instance in verb_instances(&m.corpus, &ValidityPolicy::default()) {
        let out = parser
            .parse_verbs(&instance.tokens, &[instance.verb_index], 0.5)
            .unwrap();
        let got: BTreeSet<_> = out.items().into_iter().collect();
        assert_eq!(got, gold_items(&instance), "{}", instance.sentence_id);
    }
}

#[test]
fn cut_of_ranking_equals_direct_parse() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    for r in &m.corpus[..10] {
        let ranked = parser.parse_ranked(&r.tokens, &r.pos_tags, 0.0).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            assert_eq!(
                cut(&ranked, tau),
                parser.parse(&r.tokens, &r.pos_tags, tau).unwrap()
            );
        }
    }
}

#[test]
fn lowering_tau_only_adds_items() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    for r in &m.corpus[..10] {
        let ranked = parser.parse_ranked(&r.tokens, &r.pos_tags, 0.0).unwrap();
        let mut previous: BTreeSet<(QuestionSlots, AnswerSpan)> = BTreeSet::new();
        for step in (0..=10).rev() {
            let items: BTreeSet<_> = cut(&ranked, step as f64 / 10.0)
                .items()
                .into_iter()
                .collect();
            assert!(previous.is_subset(&items));
            previous = items;
        }
        assert!(cut(&ranked, 1.0).tuples.is_empty());
    }
}

#[test]
fn emitted_questions_are_grammatical() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    let grammar = Grammar::standard();
    for r in &m.corpus {
        for t in parser.parse(&r.tokens, &r.pos_tags, 0.0).unwrap().tuples {
            assert!(grammar.accepts(&t.slots).unwrap());
            assert!(!t.spans.is_empty());
        }
    }
}

#[test]
fn sentence_without_verbs_parses_to_nothing() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    let tokens: Vec<String> = ["The", "mayor", "."].map(String::from).to_vec();
    let tags: Vec<String> = ["DT", "NN", "."].map(String::from).to_vec();
    let out = parser.parse(&tokens, &tags, 0.0).unwrap();
    assert!(out.tuples.is_empty() && out.dropped.is_empty());
}

#[test]
fn cutoff_for_two_questions_per_verb() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    let mut ranked = Vec::new();
    let mut verbs = 0;
    for r in &m.corpus {
        let v: Vec<usize> = r.verb_entries.iter().map(|e| e.verb_index).collect();
        verbs += v.len();
        ranked.push(parser.rank_verbs(&r.tokens, &v, 0.0).unwrap());
    }
    let tau = cutoff_for_questions_per_verb(&ranked, verbs, 2.0).unwrap();
    assert!(questions_per_verb(&ranked, verbs, tau) >= 2.0);
    let above: Vec<f64> = ranked
        .iter()
        .flatten()
        .map(|i| i.span_probability)
        .filter(|&p| p > tau)
        .collect();
    let next = above.iter().cloned().fold(f64::INFINITY, f64::min);
    if next.is_finite() {
        assert!(questions_per_verb(&ranked, verbs, next) < 2.0);
    }
}

#[test]
fn overgeneration_is_monotone_and_filtered_against_gold() {
    let m = models();
    let parser = Parser::new(&m.detector, &m.generator);
    let provenance = Provenance {
        model_id: "toy".into(),
        fold: Some(0),
    };
    assert!(overgenerate(&parser, &m.corpus, 1.0, &provenance)
        .unwrap()
        .is_empty());
    let low = overgenerate(&parser, &m.corpus, 0.2, &provenance).unwrap();
    let high = overgenerate(&parser, &m.corpus, 0.5, &provenance).unwrap();
    let key = |c: &qasrl::expand::CandidateQa| {
        c.spans
            .iter()
            .map(|s| (c.sentence_id.clone(), c.verb_index, c.slots.clone(), *s))
            .collect::<Vec<_>>()
    };
    let low_items: BTreeSet<_> = low.iter().flat_map(key).collect();
    assert!(high.iter().flat_map(key).all(|i| low_items.contains(&i)));
    assert!(low
        .iter()
        .all(|c| c.span_probabilities.iter().all(|&p| p > 0.2)));
    assert!(low.iter().all(|c| c.provenance == provenance));
    assert!(filter_candidates(&high, &m.corpus, &ValidityPolicy::default()).is_empty());
}
