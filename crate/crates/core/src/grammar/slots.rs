//! Slot value types for the seven-slot question template.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GrammarError;

macro_rules! word_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = GrammarError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(GrammarError::UnknownValue {
                        slot: stringify!($name),
                        value: s.to_string(),
                    }),
                }
            }
        }
    };
}

word_enum! {
    /// Question word.
    Wh {
        Who => "who",
        What => "what",
        When => "when",
        Where => "where",
        Why => "why",
        How => "how",
        HowMuch => "how much",
        HowLong => "how long",
    }
}

impl Wh {
    /// Adjunct question words cannot stand in for a missing subject.
    pub fn is_adjunct(self) -> bool {
        !matches!(self, Wh::Who | Wh::What)
    }
}

word_enum! {
    /// Auxiliary verb, without negation.
    AuxWord {
        Is => "is",
        Are => "are",
        Was => "was",
        Were => "were",
        Do => "do",
        Does => "does",
        Did => "did",
        Has => "has",
        Have => "have",
        Had => "had",
        Can => "can",
        Could => "could",
        May => "may",
        Might => "might",
        Must => "must",
        Should => "should",
        Shall => "shall",
        Will => "will",
        Would => "would",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxClass {
    None,
    Do,
    Be,
    Have,
    Modal,
}

impl AuxWord {
    pub fn class(self) -> AuxClass {
        use AuxWord::*;
        match self {
            Is | Are | Was | Were => AuxClass::Be,
            Do | Does | Did => AuxClass::Do,
            Has | Have | Had => AuxClass::Have,
            Can | Could | May | Might | Must | Should | Shall | Will | Would => AuxClass::Modal,
        }
    }

    /// Contracted negative form.
    pub fn negated_str(self) -> &'static str {
        use AuxWord::*;
        match self {
            Is => "isn't",
            Are => "aren't",
            Was => "wasn't",
            Were => "weren't",
            Do => "don't",
            Does => "doesn't",
            Did => "didn't",
            Has => "hasn't",
            Have => "haven't",
            Had => "hadn't",
            Can => "can't",
            Could => "couldn't",
            May => "mayn't",
            Might => "mightn't",
            Must => "mustn't",
            Should => "shouldn't",
            Shall => "shan't",
            Will => "won't",
            Would => "wouldn't",
        }
    }

    /// Whether the auxiliary marks past tense.
    pub fn is_past(self) -> bool {
        matches!(
            self,
            AuxWord::Was | AuxWord::Were | AuxWord::Did | AuxWord::Had
        )
    }
}

/// Filled auxiliary slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Aux {
    pub word: AuxWord,
    pub negated: bool,
}

impl Aux {
    pub const fn plain(word: AuxWord) -> Self {
        Aux {
            word,
            negated: false,
        }
    }

    pub fn class(self) -> AuxClass {
        self.word.class()
    }

    pub fn as_str(self) -> &'static str {
        if self.negated {
            self.word.negated_str()
        } else {
            self.word.as_str()
        }
    }

    /// Every auxiliary value: plain forms first, then negated forms.
    pub fn all() -> impl Iterator<Item = Aux> {
        let plain = AuxWord::ALL.iter().map(|&w| Aux {
            word: w,
            negated: false,
        });
        let neg = AuxWord::ALL.iter().map(|&w| Aux {
            word: w,
            negated: true,
        });
        plain.chain(neg)
    }
}

impl fmt::Display for Aux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aux {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Aux::all()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| GrammarError::UnknownValue {
                slot: "Aux",
                value: s.to_string(),
            })
    }
}

word_enum! {
    /// Subject and object placeholders.
    Placeholder {
        Someone => "someone",
        Something => "something",
    }
}

word_enum! {
    /// Auxiliary material attached to the main verb inside the verb slot.
    AuxChain {
        None => "",
        Be => "be",
        Been => "been",
        Being => "being",
        Have => "have",
        HaveBeen => "have been",
    }
}

word_enum! {
    VerbForm {
        Stem => "stem",
        PresentSingular3rd => "presentSingular3rd",
        PresentParticiple => "presentParticiple",
        Past => "past",
        PastParticiple => "pastParticiple",
    }
}

/// Verb slot: an auxiliary chain plus the inflected form of the predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VerbSlot {
    pub aux_chain: AuxChain,
    pub form: VerbForm,
}

impl VerbSlot {
    pub const fn new(aux_chain: AuxChain, form: VerbForm) -> Self {
        VerbSlot { aux_chain, form }
    }

    /// The legal (chain, form) combinations.
    pub const ALLOWED: [VerbSlot; 13] = {
        use AuxChain as C;
        use VerbForm as F;
        [
            VerbSlot::new(C::None, F::Stem),
            VerbSlot::new(C::None, F::PresentSingular3rd),
            VerbSlot::new(C::None, F::PresentParticiple),
            VerbSlot::new(C::None, F::Past),
            VerbSlot::new(C::None, F::PastParticiple),
            VerbSlot::new(C::Be, F::PresentParticiple),
            VerbSlot::new(C::Be, F::PastParticiple),
            VerbSlot::new(C::Been, F::PresentParticiple),
            VerbSlot::new(C::Been, F::PastParticiple),
            VerbSlot::new(C::Being, F::PastParticiple),
            VerbSlot::new(C::Have, F::PastParticiple),
            VerbSlot::new(C::HaveBeen, F::PresentParticiple),
            VerbSlot::new(C::HaveBeen, F::PastParticiple),
        ]
    };

    pub fn is_allowed(self) -> bool {
        Self::ALLOWED.contains(&self)
    }
}

word_enum! {
    /// Trailing miscellaneous slot.
    Misc {
        Someone => "someone",
        Something => "something",
        Somewhere => "somewhere",
        DoSomething => "do something",
        DoingSomething => "doing something",
        BeDoingSomething => "be doing something",
        ToDoSomething => "to do something",
    }
}

impl Misc {
    /// Clausal complements, which license an object under passive voice.
    pub fn is_verbal(self) -> bool {
        matches!(
            self,
            Misc::DoSomething | Misc::DoingSomething | Misc::BeDoingSomething | Misc::ToDoSomething
        )
    }

    pub fn is_noun_phrase(self) -> bool {
        matches!(self, Misc::Someone | Misc::Something)
    }
}

/// The seven slots, in template order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Wh,
    Aux,
    Subj,
    Verb,
    Obj,
    Prep,
    Misc,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::Wh,
        Slot::Aux,
        Slot::Subj,
        Slot::Verb,
        Slot::Obj,
        Slot::Prep,
        Slot::Misc,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::Wh => "wh",
            Slot::Aux => "aux",
            Slot::Subj => "subj",
            Slot::Verb => "verb",
            Slot::Obj => "obj",
            Slot::Prep => "prep",
            Slot::Misc => "misc",
        }
    }
}

/// A value for one slot. `None` payloads are the empty slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotValue {
    Wh(Wh),
    Aux(Option<Aux>),
    Subj(Option<Placeholder>),
    Verb(Option<VerbSlot>),
    Obj(Option<Placeholder>),
    Prep(Option<String>),
    Misc(Option<Misc>),
}

impl SlotValue {
    pub fn slot(&self) -> Slot {
        match self {
            SlotValue::Wh(_) => Slot::Wh,
            SlotValue::Aux(_) => Slot::Aux,
            SlotValue::Subj(_) => Slot::Subj,
            SlotValue::Verb(_) => Slot::Verb,
            SlotValue::Obj(_) => Slot::Obj,
            SlotValue::Prep(_) => Slot::Prep,
            SlotValue::Misc(_) => Slot::Misc,
        }
    }

    /// Abstract label used by vocabularies and the wire format. The verb slot
    /// is labelled `chain/form`, e.g. `have been/pastParticiple`.
    pub fn label(&self) -> String {
        match self {
            SlotValue::Wh(w) => w.as_str().to_string(),
            SlotValue::Aux(a) => a.map(|a| a.as_str()).unwrap_or("").to_string(),
            SlotValue::Subj(p) | SlotValue::Obj(p) => {
                p.map(|p| p.as_str()).unwrap_or("").to_string()
            }
            SlotValue::Verb(v) => match v {
                Some(v) => format!("{}/{}", v.aux_chain.as_str(), v.form.as_str()),
                None => String::new(),
            },
            SlotValue::Prep(p) => p.clone().unwrap_or_default(),
            SlotValue::Misc(m) => m.map(|m| m.as_str()).unwrap_or("").to_string(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SlotValue::Wh(_) => false,
            SlotValue::Aux(a) => a.is_none(),
            SlotValue::Subj(p) | SlotValue::Obj(p) => p.is_none(),
            SlotValue::Verb(v) => v.is_none(),
            SlotValue::Prep(p) => p.is_none(),
            SlotValue::Misc(m) => m.is_none(),
        }
    }
}

/// A question in slot form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuestionSlots {
    pub wh: Wh,
    pub aux: Option<Aux>,
    pub subj: Option<Placeholder>,
    pub verb: Option<VerbSlot>,
    pub obj: Option<Placeholder>,
    pub prep: Option<String>,
    pub misc: Option<Misc>,
}

impl QuestionSlots {
    pub fn values(&self) -> [SlotValue; 7] {
        [
            SlotValue::Wh(self.wh),
            SlotValue::Aux(self.aux),
            SlotValue::Subj(self.subj),
            SlotValue::Verb(self.verb),
            SlotValue::Obj(self.obj),
            SlotValue::Prep(self.prep.clone()),
            SlotValue::Misc(self.misc),
        ]
    }

    pub fn value(&self, slot: Slot) -> SlotValue {
        match slot {
            Slot::Wh => SlotValue::Wh(self.wh),
            Slot::Aux => SlotValue::Aux(self.aux),
            Slot::Subj => SlotValue::Subj(self.subj),
            Slot::Verb => SlotValue::Verb(self.verb),
            Slot::Obj => SlotValue::Obj(self.obj),
            Slot::Prep => SlotValue::Prep(self.prep.clone()),
            Slot::Misc => SlotValue::Misc(self.misc),
        }
    }

    /// Builds a question from seven values in slot order.
    pub fn from_values(values: &[SlotValue]) -> Result<Self, GrammarError> {
        if values.len() != 7 {
            return Err(GrammarError::Arity(values.len()));
        }
        let mut q = QuestionSlots {
            wh: Wh::What,
            aux: None,
            subj: None,
            verb: None,
            obj: None,
            prep: None,
            misc: None,
        };
        for (slot, value) in Slot::ALL.iter().zip(values) {
            if value.slot() != *slot {
                return Err(GrammarError::SlotOrder {
                    expected: slot.name(),
                    found: value.slot().name(),
                });
            }
            match value.clone() {
                SlotValue::Wh(w) => q.wh = w,
                SlotValue::Aux(a) => q.aux = a,
                SlotValue::Subj(p) => q.subj = p,
                SlotValue::Verb(v) => q.verb = v,
                SlotValue::Obj(p) => q.obj = p,
                SlotValue::Prep(p) => q.prep = p,
                SlotValue::Misc(m) => q.misc = m,
            }
        }
        Ok(q)
    }
}

fn empty_or<T: FromStr<Err = GrammarError>>(s: &str) -> Result<Option<T>, GrammarError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// Wire form of [`QuestionSlots`]; empty slots are `""`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawSlots {
    pub wh: String,
    pub aux: String,
    pub subj: String,
    pub verb_form: String,
    pub aux_chain: String,
    pub obj: String,
    pub prep: String,
    pub misc: String,
}

impl From<&QuestionSlots> for RawSlots {
    fn from(q: &QuestionSlots) -> Self {
        RawSlots {
            wh: q.wh.as_str().to_string(),
            aux: q.aux.map(|a| a.as_str()).unwrap_or("").to_string(),
            subj: q.subj.map(|p| p.as_str()).unwrap_or("").to_string(),
            verb_form: q.verb.map(|v| v.form.as_str()).unwrap_or("").to_string(),
            aux_chain: q
                .verb
                .map(|v| v.aux_chain.as_str())
                .unwrap_or("")
                .to_string(),
            obj: q.obj.map(|p| p.as_str()).unwrap_or("").to_string(),
            prep: q.prep.clone().unwrap_or_default(),
            misc: q.misc.map(|m| m.as_str()).unwrap_or("").to_string(),
        }
    }
}

impl TryFrom<RawSlots> for QuestionSlots {
    type Error = GrammarError;

    fn try_from(raw: RawSlots) -> Result<Self, Self::Error> {
        let verb = if raw.verb_form.is_empty() {
            if !raw.aux_chain.is_empty() {
                return Err(GrammarError::UnknownValue {
                    slot: "Verb",
                    value: raw.aux_chain,
                });
            }
            None
        } else {
            Some(VerbSlot::new(
                raw.aux_chain.parse()?,
                raw.verb_form.parse()?,
            ))
        };
        Ok(QuestionSlots {
            wh: raw.wh.parse()?,
            aux: empty_or(&raw.aux)?,
            subj: empty_or(&raw.subj)?,
            verb,
            obj: empty_or(&raw.obj)?,
            prep: if raw.prep.is_empty() {
                None
            } else {
                Some(raw.prep)
            },
            misc: empty_or(&raw.misc)?,
        })
    }
}

impl Serialize for QuestionSlots {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawSlots::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuestionSlots {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawSlots::deserialize(deserializer)?;
        QuestionSlots::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aux_vocabulary_has_plain_and_negated_forms() {
        let all: Vec<_> = Aux::all().collect();
        assert_eq!(all.len(), 38);
        assert_eq!(
            "won't".parse::<Aux>().unwrap(),
            Aux {
                word: AuxWord::Will,
                negated: true
            }
        );
        assert_eq!("did".parse::<Aux>().unwrap().class(), AuxClass::Do);
    }

    #[test]
    fn allowed_verb_slots_are_distinct() {
        let mut v = VerbSlot::ALLOWED.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 13);
    }

    #[test]
    fn raw_slots_reject_unknown_words() {
        let raw = RawSlots {
            wh: "whom".into(),
            aux: String::new(),
            subj: String::new(),
            verb_form: "past".into(),
            aux_chain: String::new(),
            obj: String::new(),
            prep: String::new(),
            misc: String::new(),
        };
        assert!(QuestionSlots::try_from(raw).is_err());
    }
}
