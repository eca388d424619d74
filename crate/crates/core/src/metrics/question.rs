use serde::{Deserialize, Serialize};

use crate::grammar::{QuestionSlots, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuestionAccuracy {
    /// All seven slots equal.
    pub exact: bool,
    /// Wh, subject, object and misc equal.
    pub partial: bool,
    /// Fraction of equal slots.
    pub slot_accuracy: f64,
}

const PARTIAL_SLOTS: [Slot; 4] = [Slot::Wh, Slot::Subj, Slot::Obj, Slot::Misc];

pub fn question_accuracy(predicted: &QuestionSlots, gold: &QuestionSlots) -> QuestionAccuracy {
    let same = |slot: Slot| predicted.value(slot) == gold.value(slot);
    let equal = Slot::ALL.iter().filter(|&&s| same(s)).count();
    QuestionAccuracy {
        exact: equal == Slot::ALL.len(),
        partial: PARTIAL_SLOTS.iter().all(|&s| same(s)),
        slot_accuracy: equal as f64 / Slot::ALL.len() as f64,
    }
}

/// Running means of [`QuestionAccuracy`] over many questions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuestionScores {
    pub count: usize,
    pub exact_match: f64,
    pub partial_match: f64,
    pub slot_accuracy: f64,
}

impl QuestionScores {
    pub fn add(&mut self, acc: &QuestionAccuracy) {
        let n = self.count as f64;
        let update = |mean: f64, x: f64| (mean * n + x) / (n + 1.0);
        self.exact_match = update(self.exact_match, acc.exact as u8 as f64);
        self.partial_match = update(self.partial_match, acc.partial as u8 as f64);
        self.slot_accuracy = update(self.slot_accuracy, acc.slot_accuracy);
        self.count += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{inflect, Grammar, Lexicon};

    fn q(text: &str) -> QuestionSlots {
        Grammar::standard()
            .parse_question(text, &inflect("blame", &Lexicon::builtin()))
            .unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let a = q("Who blamed someone?");
        let same = question_accuracy(&a, &a);
        assert_eq!(
            (same.exact, same.partial, same.slot_accuracy),
            (true, true, 1.0)
        );

        let aux = question_accuracy(
            &q("What did someone blame?"),
            &q("What might someone blame?"),
        );
        assert_eq!((aux.exact, aux.partial), (false, true));
        assert!((aux.slot_accuracy - 6.0 / 7.0).abs() < 1e-12);

        let para = question_accuracy(
            &q("Who did someone blame something on?"),
            &q("Who was blamed for something?"),
        );
        assert!(!para.exact);
    }

    #[test]
    fn running_means() {
        let a = q("Who blamed someone?");
        let b = q("What did someone blame?");
        let mut scores = QuestionScores::default();
        scores.add(&question_accuracy(&a, &a));
        scores.add(&question_accuracy(&a, &b));
        assert_eq!(scores.count, 2);
        assert!((scores.exact_match - 0.5).abs() < 1e-12);
    }
}
