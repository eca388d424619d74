//! Brute-force checks of the question automaton against a direct reading of
//! the constraint table.

mod support;

use qasrl::grammar::{
    inflect, AuxChain as C, Grammar, GrammarError, Lexicon, Slot, SlotValue, VerbForm as F,
    VerbSlot, Wh,
};
use support::grammar_oracle::Oracle;

#[test]
fn automaton_agrees_with_constraint_table_on_full_product() {
    let g = Grammar::standard();
    let oracle = Oracle::new(g);
    let mut accepted = 0usize;
    let mut total = 0usize;
    oracle.for_each_tuple(|idx| {
        total += 1;
        let expected = oracle.accepts(idx);
        assert_eq!(g.accepts_indices(idx), expected, "{idx:?}");
        accepted += expected as usize;
    });
    assert_eq!(total, oracle.sizes().iter().product::<usize>());
    assert_eq!(g.enumerate().len(), accepted);
}

#[test]
fn autocomplete_is_sound_and_complete() {
    let g = Grammar::standard();
    let oracle = Oracle::new(g);
    let accepted = oracle.walk_prefixes(|prefix, live| match g.autocomplete_indices(prefix) {
        Ok(got) => assert_eq!(got, live, "prefix {prefix:?}"),
        Err(GrammarError::Unreachable { .. }) => assert!(live.is_empty(), "prefix {prefix:?}"),
        Err(e) => panic!("prefix {prefix:?}: {e}"),
    });
    assert!(accepted > 0);
}

#[test]
fn autocomplete_accepts_slot_values() {
    let g = Grammar::standard();
    let prefix = [
        SlotValue::Wh(Wh::Who),
        SlotValue::Aux(None),
        SlotValue::Subj(None),
    ];
    let got = g.autocomplete(&prefix).unwrap();
    let expected: Vec<SlotValue> = [
        VerbSlot::new(C::None, F::PresentSingular3rd),
        VerbSlot::new(C::None, F::Past),
    ]
    .into_iter()
    .map(|v| SlotValue::Verb(Some(v)))
    .collect();
    assert_eq!(got, expected);
    assert!(!got.contains(&SlotValue::Verb(Some(VerbSlot::new(C::None, F::Stem)))));

    let bad = [SlotValue::Aux(None)];
    assert!(matches!(
        g.autocomplete(&bad),
        Err(GrammarError::SlotOrder { .. })
    ));
    let dead = [
        SlotValue::Wh(Wh::When),
        SlotValue::Aux(None),
        SlotValue::Subj(None),
    ];
    assert!(matches!(
        g.autocomplete(&dead),
        Err(GrammarError::Unreachable { slot: "aux" })
    ));
    assert_eq!(
        g.autocomplete(&[]).unwrap().len(),
        g.vocabulary(Slot::Wh).len()
    );
}

#[test]
fn render_parse_round_trip_over_full_space() {
    let g = Grammar::standard();
    let verb = inflect("blame", &Lexicon::builtin());
    let all = g.enumerate();
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    std::thread::scope(|scope| {
        for chunk in all.chunks(all.len().div_ceil(threads)) {
            let verb = &verb;
            scope.spawn(move || {
                for q in chunk {
                    let text = g.render(q, verb);
                    assert_eq!(&g.parse_question(&text, verb).unwrap(), q, "{text}");
                }
            });
        }
    });
}

#[test]
fn render_parse_round_trip_for_other_verbs() {
    let g = Grammar::standard();
    let lexicon = Lexicon::builtin();
    let all = g.enumerate();
    for stem in ["refuse", "put", "give", "be"] {
        let verb = inflect(stem, &lexicon);
        for q in all.iter().step_by(97) {
            let text = g.render(q, &verb);
            assert_eq!(&g.parse_question(&text, &verb).unwrap(), q, "{text}");
        }
    }
}
