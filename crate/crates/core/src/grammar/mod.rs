//! The seven-slot question template.
//!
//! A [`Grammar`] owns the slot vocabularies (the preposition list is data and
//! can be replaced), the automaton that decides legality, and the derived
//! operations: autocomplete, auto-suggest, and rendering to and from surface
//! strings. It is immutable once built and can be shared freely.

mod automaton;
mod inflect;
mod render;
mod slots;
mod suggest;

use std::collections::HashMap;
use std::sync::OnceLock;

pub use automaton::{AutomatonState, PrepKind, Voice};
pub use inflect::{inflect, InflectionTable, Lexicon};
pub use render::surface;
pub use slots::{
    Aux, AuxChain, AuxClass, AuxWord, Misc, Placeholder, QuestionSlots, RawSlots, Slot, SlotValue,
    VerbForm, VerbSlot, Wh,
};
pub use suggest::{extracted_position, ArgumentPosition, Suggestion};

const DEFAULT_PREPOSITIONS: &str = include_str!("../../data/prepositions.txt");

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("unknown {slot} value {value:?}")]
    UnknownValue { slot: &'static str, value: String },
    #[error("expected 7 slot values, got {0}")]
    Arity(usize),
    #[error("slot order: expected {expected}, found {found}")]
    SlotOrder {
        expected: &'static str,
        found: &'static str,
    },
    #[error("prefix is not reachable: rejected at slot {slot}")]
    Unreachable { slot: &'static str },
    #[error("question {0:?} is not generated by the grammar")]
    Unparseable(String),
    #[error("question {question:?} has {count} readings")]
    Ambiguous { question: String, count: usize },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("invalid preposition list: {0}")]
    Prepositions(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Slot vocabularies plus the legality automaton.
#[derive(Debug)]
pub struct Grammar {
    prepositions: Vec<String>,
    prep_kinds: HashMap<String, PrepKind>,
    vocab: [Vec<SlotValue>; 7],
    index: HashMap<SlotValue, usize>,
    labels: [HashMap<String, usize>; 7],
    prep_kind_at: Vec<PrepKind>,
    tokens: [Vec<Vec<String>>; 7],
    /// Indexed by state code: `None` for states never reached.
    live: Vec<Option<bool>>,
}

impl Grammar {
    /// Grammar over a custom preposition list.
    pub fn new(prepositions: Vec<String>) -> Result<Self, GrammarError> {
        let mut seen = std::collections::HashSet::new();
        for p in &prepositions {
            let normalized = p.split_whitespace().collect::<Vec<_>>().join(" ");
            if normalized.is_empty() || normalized != *p || p.to_lowercase() != *p {
                return Err(GrammarError::Prepositions(format!("bad entry {p:?}")));
            }
            if !seen.insert(p.clone()) {
                return Err(GrammarError::Prepositions(format!("duplicate entry {p:?}")));
            }
        }
        let prep_kinds: HashMap<String, PrepKind> = prepositions
            .iter()
            .map(|p| {
                let absorbs = p == "to" || seen.contains(&format!("{p} to"));
                (
                    p.clone(),
                    if absorbs {
                        PrepKind::AbsorbsTo
                    } else {
                        PrepKind::Plain
                    },
                )
            })
            .collect();

        let vocab: [Vec<SlotValue>; 7] = [
            Wh::ALL.iter().map(|&w| SlotValue::Wh(w)).collect(),
            std::iter::once(None)
                .chain(Aux::all().map(Some))
                .map(SlotValue::Aux)
                .collect(),
            placeholder_values(SlotValue::Subj),
            std::iter::once(None)
                .chain(VerbSlot::ALLOWED.iter().copied().map(Some))
                .map(SlotValue::Verb)
                .collect(),
            placeholder_values(SlotValue::Obj),
            std::iter::once(None)
                .chain(prepositions.iter().cloned().map(Some))
                .map(SlotValue::Prep)
                .collect(),
            std::iter::once(None)
                .chain(Misc::ALL.iter().copied().map(Some))
                .map(SlotValue::Misc)
                .collect(),
        ];
        let index = vocab
            .iter()
            .flat_map(|values| values.iter().enumerate().map(|(i, v)| (v.clone(), i)))
            .collect();

        let labels = std::array::from_fn(|i| {
            vocab[i]
                .iter()
                .enumerate()
                .map(|(k, v)| (v.label(), k))
                .collect()
        });

        let prep_kind_at = vocab[Slot::Prep.index()]
            .iter()
            .map(|v| match v {
                SlotValue::Prep(Some(p)) => prep_kinds[p],
                _ => PrepKind::Empty,
            })
            .collect();
        let tokens = std::array::from_fn(|i| {
            vocab[i]
                .iter()
                .map(|v| v.label().split_whitespace().map(str::to_string).collect())
                .collect()
        });

        let mut grammar = Grammar {
            prepositions,
            prep_kinds,
            vocab,
            index,
            labels,
            prep_kind_at,
            tokens,
            live: Vec::new(),
        };
        let mut live = vec![None; AutomatonState::CODES];
        grammar.compute_live(AutomatonState::START, &mut live);
        grammar.live = live;
        Ok(grammar)
    }

    /// The shared grammar over the shipped preposition list.
    pub fn standard() -> &'static Grammar {
        static STANDARD: OnceLock<Grammar> = OnceLock::new();
        STANDARD.get_or_init(|| {
            Grammar::new(default_prepositions()).expect("shipped preposition list is valid")
        })
    }

    pub fn prepositions(&self) -> &[String] {
        &self.prepositions
    }

    /// Values of `slot` in vocabulary order; the empty value comes first
    /// for every slot except `wh`.
    pub fn vocabulary(&self, slot: Slot) -> &[SlotValue] {
        &self.vocab[slot.index()]
    }

    pub fn value_index(&self, value: &SlotValue) -> Option<usize> {
        self.index.get(value).copied()
    }

    /// Vocabulary index of the value of `slot` whose wire label is `label`.
    pub fn index_by_label(&self, slot: Slot, label: &str) -> Option<usize> {
        self.labels[slot.index()].get(label).copied()
    }

    /// The value of `slot` whose wire label is `label`.
    pub fn value_by_label(&self, slot: Slot, label: &str) -> Option<&SlotValue> {
        self.index_by_label(slot, label).map(|i| &self.vocab[slot.index()][i])
    }

    /// Vocabulary index of every slot value, if all are in vocabulary.
    pub fn slot_indices(&self, slots: &QuestionSlots) -> Option<[usize; 7]> {
        let values = slots.values();
        let mut out = [0; 7];
        for (o, v) in out.iter_mut().zip(&values) {
            *o = self.value_index(v)?;
        }
        Some(out)
    }

    /// Inverse of [`Grammar::slot_indices`]; panics on an index out of range.
    pub fn slots_from_indices(&self, indices: &[usize; 7]) -> QuestionSlots {
        let values: Vec<SlotValue> = Slot::ALL
            .iter()
            .zip(indices)
            .map(|(slot, &i)| self.vocabulary(*slot)[i].clone())
            .collect();
        QuestionSlots::from_values(&values).expect("one value per slot")
    }

    fn check_vocab(&self, value: &SlotValue) -> Result<(), GrammarError> {
        if self.index.contains_key(value) {
            Ok(())
        } else {
            Err(GrammarError::UnknownValue {
                slot: value.slot().name(),
                value: value.label(),
            })
        }
    }

    fn transition(&self, state: &AutomatonState, value: &SlotValue) -> Option<AutomatonState> {
        if state.next_slot() != Some(value.slot()) {
            return None;
        }
        automaton::transition(state, value, |p| {
            self.prep_kinds.get(p).copied().unwrap_or(PrepKind::Plain)
        })
    }

    /// Transition on the `idx`-th vocabulary value of the next slot.
    fn transition_at(&self, state: &AutomatonState, idx: usize) -> Option<AutomatonState> {
        let slot = state.next_slot()?;
        let value = self.vocab[slot.index()].get(idx)?;
        let kind = if slot == Slot::Prep {
            self.prep_kind_at[idx]
        } else {
            PrepKind::Empty
        };
        automaton::transition(state, value, |_| kind)
    }

    /// Words of each value of `slot`, except for the verb slot whose words
    /// depend on the verb.
    pub(crate) fn value_tokens(&self, slot: Slot) -> &[Vec<String>] {
        &self.tokens[slot.index()]
    }

    /// Advances the automaton by one slot value. `Ok(None)` means rejection.
    pub fn step(
        &self,
        state: &AutomatonState,
        value: &SlotValue,
    ) -> Result<Option<AutomatonState>, GrammarError> {
        self.check_vocab(value)?;
        Ok(self.transition(state, value))
    }

    fn compute_live(&self, state: AutomatonState, memo: &mut [Option<bool>]) -> bool {
        if let Some(known) = memo[state.code()] {
            return known;
        }
        let live = match state.next_slot() {
            None => true,
            Some(slot) => {
                let mut any = false;
                for value in self.vocabulary(slot) {
                    if let Some(next) = self.transition(&state, value) {
                        // visit every successor so the memo covers all reachable states
                        any |= self.compute_live(next, memo);
                    }
                }
                any
            }
        };
        memo[state.code()] = Some(live);
        live
    }

    /// Whether some completion from `state` is accepted.
    pub fn is_live(&self, state: &AutomatonState) -> bool {
        self.live[state.code()].unwrap_or(false)
    }

    /// Number of distinct reachable automaton states.
    pub fn state_count(&self) -> usize {
        self.live.iter().filter(|l| l.is_some()).count()
    }

    /// Runs a prefix of slot values from the start state.
    pub fn run(&self, prefix: &[SlotValue]) -> Result<Option<AutomatonState>, GrammarError> {
        let mut state = AutomatonState::START;
        for value in prefix {
            match self.step(&state, value)? {
                Some(next) => state = next,
                None => return Ok(None),
            }
        }
        Ok(Some(state))
    }

    /// Acceptance of a question given as vocabulary indices, one per slot.
    pub fn accepts_indices(&self, indices: &[usize; 7]) -> bool {
        let mut state = AutomatonState::START;
        for &idx in indices {
            match self.transition_at(&state, idx) {
                Some(next) => state = next,
                None => return false,
            }
        }
        state.is_accepting()
    }

    /// [`Grammar::autocomplete`] over vocabulary indices.
    pub fn autocomplete_indices(&self, prefix: &[usize]) -> Result<Vec<usize>, GrammarError> {
        let mut state = AutomatonState::START;
        for (k, &idx) in prefix.iter().enumerate() {
            let slot = *Slot::ALL.get(k).ok_or(GrammarError::Arity(prefix.len()))?;
            if idx >= self.vocab[k].len() {
                return Err(GrammarError::UnknownValue {
                    slot: slot.name(),
                    value: format!("#{idx}"),
                });
            }
            match self.transition_at(&state, idx) {
                Some(next) if self.is_live(&next) => state = next,
                _ => return Err(GrammarError::Unreachable { slot: slot.name() }),
            }
        }
        let Some(slot) = state.next_slot() else {
            return Ok(Vec::new());
        };
        Ok((0..self.vocab[slot.index()].len())
            .filter(|&i| {
                self.transition_at(&state, i)
                    .map(|s| self.is_live(&s))
                    .unwrap_or(false)
            })
            .collect())
    }

    /// Whether the complete question is legal.
    pub fn accepts(&self, slots: &QuestionSlots) -> Result<bool, GrammarError> {
        Ok(self
            .run(&slots.values())?
            .map(|s| s.is_accepting())
            .unwrap_or(false))
    }

    /// Like [`Grammar::accepts`], treating out-of-vocabulary values as rejection.
    pub fn is_valid(&self, slots: &QuestionSlots) -> bool {
        self.accepts(slots).unwrap_or(false)
    }

    /// The values for the next slot that keep `prefix` completable.
    pub fn autocomplete(&self, prefix: &[SlotValue]) -> Result<Vec<SlotValue>, GrammarError> {
        let mut indices = Vec::with_capacity(prefix.len());
        for (k, value) in prefix.iter().enumerate() {
            let expected = *Slot::ALL.get(k).ok_or(GrammarError::Arity(prefix.len()))?;
            if value.slot() != expected {
                return Err(GrammarError::SlotOrder {
                    expected: expected.name(),
                    found: value.slot().name(),
                });
            }
            self.check_vocab(value)?;
            indices.push(self.index[value]);
        }
        let slot = Slot::ALL.get(prefix.len()).copied();
        let next = self.autocomplete_indices(&indices)?;
        Ok(match slot {
            Some(slot) => next
                .into_iter()
                .map(|i| self.vocab[slot.index()][i].clone())
                .collect(),
            None => Vec::new(),
        })
    }

    /// Every accepted question, in vocabulary order.
    pub fn enumerate(&self) -> Vec<QuestionSlots> {
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(7);
        self.enumerate_from(AutomatonState::START, &mut prefix, &mut out);
        out
    }

    fn enumerate_from(
        &self,
        state: AutomatonState,
        prefix: &mut Vec<SlotValue>,
        out: &mut Vec<QuestionSlots>,
    ) {
        let Some(slot) = state.next_slot() else {
            out.push(QuestionSlots::from_values(prefix).expect("complete prefix"));
            return;
        };
        for value in self.vocabulary(slot) {
            if let Some(next) = self.transition(&state, value).filter(|s| self.is_live(s)) {
                prefix.push(value.clone());
                self.enumerate_from(next, prefix, out);
                prefix.pop();
            }
        }
    }
}

fn placeholder_values(wrap: fn(Option<Placeholder>) -> SlotValue) -> Vec<SlotValue> {
    [
        None,
        Some(Placeholder::Someone),
        Some(Placeholder::Something),
    ]
    .into_iter()
    .map(wrap)
    .collect()
}

pub fn default_prepositions() -> Vec<String> {
    DEFAULT_PREPOSITIONS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn q(
        wh: Wh,
        aux: Option<&str>,
        subj: Option<Placeholder>,
        verb: (AuxChain, VerbForm),
        obj: Option<Placeholder>,
        prep: Option<&str>,
        misc: Option<Misc>,
    ) -> QuestionSlots {
        QuestionSlots {
            wh,
            aux: aux.map(|a| a.parse().unwrap()),
            subj,
            verb: Some(VerbSlot::new(verb.0, verb.1)),
            obj,
            prep: prep.map(str::to_string),
            misc,
        }
    }

    #[test]
    fn shipped_prepositions() {
        let g = Grammar::standard();
        assert_eq!(g.prepositions().len(), 40);
        assert!(g.prepositions().iter().any(|p| p == "out of"));
        assert!(g.prepositions().iter().any(|p| p == "up to"));
    }

    #[test]
    fn verbless_question_is_rejected() {
        let g = Grammar::standard();
        let mut who = q(
            Wh::Who,
            None,
            None,
            (AuxChain::None, VerbForm::Past),
            None,
            None,
            None,
        );
        who.verb = None;
        assert!(!g.accepts(&who).unwrap());
    }

    #[test]
    fn counterexample_is_rejected() {
        // "What did been appeared?"
        let g = Grammar::standard();
        let bad = q(
            Wh::What,
            Some("did"),
            None,
            (AuxChain::Been, VerbForm::PastParticiple),
            None,
            None,
            None,
        );
        assert!(!g.accepts(&bad).unwrap());
        let bad_subj = QuestionSlots {
            subj: Some(Placeholder::Someone),
            ..bad
        };
        assert!(!g.accepts(&bad_subj).unwrap());
    }

    #[test]
    fn out_of_vocabulary_is_an_error() {
        let g = Grammar::standard();
        let odd = q(
            Wh::What,
            Some("did"),
            Some(Placeholder::Someone),
            (AuxChain::None, VerbForm::Stem),
            None,
            Some("amidst"),
            None,
        );
        assert!(matches!(
            g.accepts(&odd),
            Err(GrammarError::UnknownValue { slot: "prep", .. })
        ));
    }

    #[test]
    fn empty_prefix_offers_every_wh_word() {
        let g = Grammar::standard();
        let next = g.autocomplete(&[]).unwrap();
        assert_eq!(
            next,
            Wh::ALL
                .iter()
                .map(|&w| SlotValue::Wh(w))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn unreachable_prefix_is_an_error() {
        let g = Grammar::standard();
        let prefix = [SlotValue::Wh(Wh::When), SlotValue::Aux(None)];
        // "When" followed by no auxiliary can never get a subject.
        assert!(matches!(
            g.autocomplete(&prefix),
            Err(GrammarError::Unreachable { slot: "aux" })
        ));
    }

    #[test]
    fn do_support_prefix_forces_bare_stem() {
        let g = Grammar::standard();
        let prefix = [
            SlotValue::Wh(Wh::What),
            SlotValue::Aux(Some(Aux::plain(AuxWord::Did))),
            SlotValue::Subj(Some(Placeholder::Someone)),
        ];
        let verbs = g.autocomplete(&prefix).unwrap();
        assert_eq!(
            verbs,
            vec![SlotValue::Verb(Some(VerbSlot::new(
                AuxChain::None,
                VerbForm::Stem
            )))]
        );
    }

    #[test]
    fn custom_preposition_lists_are_validated() {
        assert!(Grammar::new(vec!["on".into(), "on".into()]).is_err());
        assert!(Grammar::new(vec!["On".into()]).is_err());
        let g = Grammar::new(vec!["on".into(), "beneath".into()]).unwrap();
        assert_eq!(g.vocabulary(Slot::Prep).len(), 3);
    }

    #[test]
    fn automaton_state_space_is_small() {
        let g = Grammar::standard();
        assert!(g.state_count() < 1_000, "{}", g.state_count());
        let all = g.enumerate();
        assert!(!all.is_empty());
        assert!(all.iter().all(|q| g.accepts(q).unwrap()));
    }
}
