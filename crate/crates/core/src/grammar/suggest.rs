//! Auto-suggestion of complete questions for arguments not yet asked about.

use serde::{Deserialize, Serialize};

use super::slots::{
    Aux, AuxChain, AuxWord, Misc, Placeholder, QuestionSlots, VerbForm, VerbSlot, Wh,
};
use super::{AuxClass, Grammar, InflectionTable};

/// Argument position a question asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ArgumentPosition {
    Subj,
    Obj,
    PrepObj,
    Misc,
}

impl ArgumentPosition {
    pub const ALL: [ArgumentPosition; 4] = [
        ArgumentPosition::Subj,
        ArgumentPosition::Obj,
        ArgumentPosition::PrepObj,
        ArgumentPosition::Misc,
    ];
}

/// The gap a `who`/`what` question leaves; adjunct questions extract no argument.
pub fn extracted_position(q: &QuestionSlots) -> Option<ArgumentPosition> {
    if q.wh.is_adjunct() {
        return None;
    }
    if q.subj.is_none() {
        Some(ArgumentPosition::Subj)
    } else if q.obj.is_none() {
        Some(ArgumentPosition::Obj)
    } else if q.misc.is_some() {
        None
    } else if q.prep.is_some() {
        Some(ArgumentPosition::PrepObj)
    } else {
        Some(ArgumentPosition::Misc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub slots: QuestionSlots,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tense {
    Past,
    Present,
    Modal(AuxWord),
}

impl Tense {
    fn of(q: &QuestionSlots) -> Tense {
        match q.aux {
            None => match q.verb.map(|v| v.form) {
                Some(VerbForm::PresentSingular3rd) => Tense::Present,
                _ => Tense::Past,
            },
            Some(a) if a.class() == AuxClass::Modal => Tense::Modal(a.word),
            Some(a) if a.word.is_past() => Tense::Past,
            Some(_) => Tense::Present,
        }
    }

    /// Auxiliary and verb slot for a question with (or without) a subject.
    fn realize(self, with_subject: bool) -> (Option<Aux>, VerbSlot) {
        let stem = VerbSlot::new(AuxChain::None, VerbForm::Stem);
        match (self, with_subject) {
            (Tense::Past, false) => (None, VerbSlot::new(AuxChain::None, VerbForm::Past)),
            (Tense::Present, false) => (
                None,
                VerbSlot::new(AuxChain::None, VerbForm::PresentSingular3rd),
            ),
            (Tense::Past, true) => (Some(Aux::plain(AuxWord::Did)), stem),
            (Tense::Present, true) => (Some(Aux::plain(AuxWord::Does)), stem),
            (Tense::Modal(m), _) => (Some(Aux::plain(m)), stem),
        }
    }
}

impl Grammar {
    /// Complete questions about argument positions no prior question extracts.
    ///
    /// Tense follows the first prior question (past by default). Positions
    /// other than the subject are only suggested once a prior question
    /// mentions them, and other arguments are filled the same way. Results are
    /// ordered subject, object, prepositional object, misc; ties follow
    /// vocabulary order.
    pub fn auto_suggest(&self, prior: &[QuestionSlots], verb: &InflectionTable) -> Vec<Suggestion> {
        let covered: Vec<ArgumentPosition> = prior.iter().filter_map(extracted_position).collect();
        let tense = prior.first().map(Tense::of).unwrap_or(Tense::Past);

        let has_obj = prior
            .iter()
            .any(|q| q.obj.is_some() || extracted_position(q) == Some(ArgumentPosition::Obj));
        let mut preps: Vec<String> = Vec::new();
        for p in prior.iter().filter_map(|q| q.prep.clone()) {
            if !preps.contains(&p) {
                preps.push(p);
            }
        }
        let has_second_object = prior
            .iter()
            .any(|q| q.misc.map(Misc::is_noun_phrase).unwrap_or(false));
        let complement = prior
            .iter()
            .filter_map(|q| q.misc)
            .find(|m| !m.is_noun_phrase());

        let placeholders = [Placeholder::Someone, Placeholder::Something];
        let obj_fillers: Vec<Option<Placeholder>> = if has_obj {
            placeholders.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };

        let mut candidates: Vec<(ArgumentPosition, QuestionSlots)> = Vec::new();
        for position in ArgumentPosition::ALL {
            if covered.contains(&position) {
                continue;
            }
            for wh in [Wh::Who, Wh::What] {
                let subject_fillers: Vec<Option<Placeholder>> =
                    if position == ArgumentPosition::Subj {
                        vec![None]
                    } else {
                        placeholders.iter().copied().map(Some).collect()
                    };
                for &subj in &subject_fillers {
                    let (aux, verb_slot) = tense.realize(subj.is_some());
                    let base = QuestionSlots {
                        wh,
                        aux,
                        subj,
                        verb: Some(verb_slot),
                        obj: None,
                        prep: None,
                        misc: None,
                    };
                    match position {
                        ArgumentPosition::Subj => {
                            for &obj in &obj_fillers {
                                candidates.push((
                                    position,
                                    QuestionSlots {
                                        obj,
                                        prep: preps.first().cloned(),
                                        misc: complement,
                                        ..base.clone()
                                    },
                                ));
                            }
                        }
                        ArgumentPosition::Obj if has_obj => candidates.push((
                            position,
                            QuestionSlots {
                                prep: preps.first().cloned(),
                                misc: complement,
                                ..base.clone()
                            },
                        )),
                        ArgumentPosition::PrepObj => {
                            for prep in &preps {
                                for &obj in obj_fillers.iter().filter(|o| o.is_some()) {
                                    candidates.push((
                                        position,
                                        QuestionSlots {
                                            obj,
                                            prep: Some(prep.clone()),
                                            ..base.clone()
                                        },
                                    ));
                                }
                            }
                        }
                        ArgumentPosition::Misc if has_second_object => {
                            for &obj in obj_fillers.iter().filter(|o| o.is_some()) {
                                candidates.push((
                                    position,
                                    QuestionSlots {
                                        obj,
                                        ..base.clone()
                                    },
                                ));
                            }
                        }
                        ArgumentPosition::Obj | ArgumentPosition::Misc => {}
                    }
                }
            }
        }

        let key = |q: &QuestionSlots| -> Vec<usize> {
            q.values()
                .iter()
                .map(|v| self.value_index(v).unwrap_or(usize::MAX))
                .collect()
        };
        let mut kept: Vec<(ArgumentPosition, Vec<usize>, QuestionSlots)> = candidates
            .into_iter()
            .filter(|(position, q)| {
                self.is_valid(q) && extracted_position(q) == Some(*position) && !prior.contains(q)
            })
            .map(|(position, q)| (position, key(&q), q))
            .collect();
        kept.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        kept.dedup_by(|a, b| a.2 == b.2);
        kept.into_iter()
            .map(|(_, _, slots)| Suggestion {
                text: self.render(&slots, verb),
                slots,
            })
            .collect()
    }
}
