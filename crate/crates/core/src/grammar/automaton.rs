//! Slot-level automaton deciding question legality.
//!
//! States pair the position in the template with the fragment of syntax the
//! remaining slots depend on. Transitions reject combinations that violate the
//! constraint table:
//!
//! - (a) the verb slot is mandatory;
//! - (b) an empty subject needs `who`/`what` and no do-support;
//! - (c) a filled subject needs an auxiliary;
//! - (d) adjunct question words need a filled subject;
//! - (e) the verb chain/form must agree with the auxiliary;
//! - (f) a passive verb takes no object unless a preposition or clausal
//!   complement follows;
//! - (g) `to do something` needs a preposition that does not absorb the `to`;
//! - (h) a noun-phrase misc needs an object or preposition before it.
//!
//! Constraints (g) and (h) keep rendering injective.

use serde::{Deserialize, Serialize};

use super::slots::{AuxChain, AuxClass, Misc, Slot, SlotValue, VerbForm, VerbSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Unset,
    Active,
    Passive,
}

/// What the preposition slot held, as far as later slots care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PrepKind {
    Empty,
    Plain,
    /// `to`, or a preposition that forms another vocabulary entry with `to`.
    AbsorbsTo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutomatonState {
    pub slot_index: u8,
    pub subject_present: bool,
    pub wh_is_adjunct: bool,
    pub aux_class: AuxClass,
    pub verb_voice: Voice,
    pub object_present: bool,
    pub prep: PrepKind,
}

impl AutomatonState {
    pub const START: AutomatonState = AutomatonState {
        slot_index: 0,
        subject_present: false,
        wh_is_adjunct: false,
        aux_class: AuxClass::None,
        verb_voice: Voice::Unset,
        object_present: false,
        prep: PrepKind::Empty,
    };

    pub fn is_accepting(&self) -> bool {
        self.slot_index as usize == Slot::ALL.len()
    }

    /// Dense code below [`AutomatonState::CODES`].
    pub fn code(&self) -> usize {
        let aux = self.aux_class as usize;
        let voice = self.verb_voice as usize;
        let prep = self.prep as usize;
        let mut c = self.slot_index as usize;
        c = c * 2 + self.subject_present as usize;
        c = c * 2 + self.wh_is_adjunct as usize;
        c = c * 5 + aux;
        c = c * 3 + voice;
        c = c * 2 + self.object_present as usize;
        c * 3 + prep
    }

    pub const CODES: usize = 8 * 2 * 2 * 5 * 3 * 2 * 3;

    /// The slot the next transition fills, if any.
    pub fn next_slot(&self) -> Option<Slot> {
        Slot::ALL.get(self.slot_index as usize).copied()
    }
}

fn verb_agrees(aux: AuxClass, subject_present: bool, verb: VerbSlot) -> bool {
    use AuxChain as C;
    use VerbForm as F;
    let VerbSlot { aux_chain, form } = verb;
    match aux {
        AuxClass::Do => aux_chain == C::None && form == F::Stem,
        AuxClass::Be => matches!(
            (aux_chain, form),
            (C::None, F::PresentParticiple)
                | (C::None, F::PastParticiple)
                | (C::Being, F::PastParticiple)
        ),
        AuxClass::Have => matches!(
            (aux_chain, form),
            (C::None, F::PastParticiple)
                | (C::Been, F::PresentParticiple)
                | (C::Been, F::PastParticiple)
        ),
        AuxClass::Modal => matches!(
            (aux_chain, form),
            (C::None, F::Stem)
                | (C::Be, F::PresentParticiple)
                | (C::Be, F::PastParticiple)
                | (C::Have, F::PastParticiple)
                | (C::HaveBeen, F::PresentParticiple)
                | (C::HaveBeen, F::PastParticiple)
        ),
        AuxClass::None => {
            !subject_present
                && aux_chain == C::None
                && matches!(form, F::Past | F::PresentSingular3rd)
        }
    }
}

fn voice_of(aux: AuxClass, verb: VerbSlot) -> Voice {
    let passive = verb.form == VerbForm::PastParticiple
        && match verb.aux_chain {
            AuxChain::Be | AuxChain::Been | AuxChain::Being | AuxChain::HaveBeen => true,
            AuxChain::None => aux == AuxClass::Be,
            AuxChain::Have => false,
        };
    if passive {
        Voice::Passive
    } else {
        Voice::Active
    }
}

/// One transition. `prep_kind` classifies a filled preposition; the caller
/// has already checked the value is in vocabulary and in the right slot.
pub(crate) fn transition(
    state: &AutomatonState,
    value: &SlotValue,
    prep_kind: impl Fn(&str) -> PrepKind,
) -> Option<AutomatonState> {
    let mut next = *state;
    next.slot_index += 1;
    match value {
        SlotValue::Wh(wh) => next.wh_is_adjunct = wh.is_adjunct(),
        SlotValue::Aux(aux) => next.aux_class = aux.map(|a| a.class()).unwrap_or(AuxClass::None),
        SlotValue::Subj(subj) => {
            next.subject_present = subj.is_some();
            if subj.is_none() && (state.wh_is_adjunct || state.aux_class == AuxClass::Do) {
                return None;
            }
            if subj.is_some() && state.aux_class == AuxClass::None {
                return None;
            }
        }
        SlotValue::Verb(verb) => {
            let verb = (*verb)?;
            if !verb.is_allowed() || !verb_agrees(state.aux_class, state.subject_present, verb) {
                return None;
            }
            next.verb_voice = voice_of(state.aux_class, verb);
        }
        SlotValue::Obj(obj) => next.object_present = obj.is_some(),
        SlotValue::Prep(prep) => {
            next.prep = match prep {
                Some(p) => prep_kind(p),
                None => PrepKind::Empty,
            }
        }
        SlotValue::Misc(misc) => {
            let verbal = misc.map(Misc::is_verbal).unwrap_or(false);
            if state.verb_voice == Voice::Passive
                && state.object_present
                && state.prep == PrepKind::Empty
                && !verbal
            {
                return None;
            }
            if *misc == Some(Misc::ToDoSomething) && state.prep != PrepKind::Plain {
                return None;
            }
            if misc.map(Misc::is_noun_phrase).unwrap_or(false)
                && !state.object_present
                && state.prep == PrepKind::Empty
            {
                return None;
            }
        }
    }
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::slots::AuxClass;

    #[test]
    fn do_support_requires_bare_stem() {
        assert!(verb_agrees(
            AuxClass::Do,
            true,
            VerbSlot::new(AuxChain::None, VerbForm::Stem)
        ));
        assert!(!verb_agrees(
            AuxClass::Do,
            true,
            VerbSlot::new(AuxChain::Been, VerbForm::PastParticiple)
        ));
    }

    #[test]
    fn perfect_is_active_but_be_participle_is_passive() {
        let pp = VerbSlot::new(AuxChain::None, VerbForm::PastParticiple);
        assert_eq!(voice_of(AuxClass::Have, pp), Voice::Active);
        assert_eq!(voice_of(AuxClass::Be, pp), Voice::Passive);
        assert_eq!(
            voice_of(
                AuxClass::Modal,
                VerbSlot::new(AuxChain::Have, VerbForm::PastParticiple)
            ),
            Voice::Active
        );
        assert_eq!(
            voice_of(
                AuxClass::Modal,
                VerbSlot::new(AuxChain::HaveBeen, VerbForm::PastParticiple)
            ),
            Voice::Passive
        );
    }
}
