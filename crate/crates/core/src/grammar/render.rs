use super::{
    AutomatonState, Grammar, GrammarError, InflectionTable, QuestionSlots, Slot, SlotValue,
};

/// Surface words of one slot value (empty for an empty slot).
pub fn surface(value: &SlotValue, verb: &InflectionTable) -> String {
    match value {
        SlotValue::Verb(Some(v)) => {
            let form = verb.form(v.form);
            match v.aux_chain.as_str() {
                "" => form.to_string(),
                chain => format!("{chain} {form}"),
            }
        }
        SlotValue::Verb(None) => String::new(),
        other => other.label(),
    }
}

/// Number of tokens consumed if `words` is a prefix of `tokens`.
fn match_words<'a>(words: impl Iterator<Item = &'a str>, tokens: &[&str]) -> Option<usize> {
    let mut width = 0;
    for word in words {
        if tokens.get(width) != Some(&word) {
            return None;
        }
        width += 1;
    }
    Some(width)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl Grammar {
    /// Joins the non-empty slots with single spaces, capitalizes, appends `?`.
    pub fn render(&self, slots: &QuestionSlots, verb: &InflectionTable) -> String {
        let words: Vec<String> = slots
            .values()
            .iter()
            .map(|v| surface(v, verb))
            .filter(|w| !w.is_empty())
            .collect();
        format!("{}?", capitalize(&words.join(" ")))
    }

    /// Inverse of [`Grammar::render`] on the accepted language.
    pub fn parse_question(
        &self,
        question: &str,
        verb: &InflectionTable,
    ) -> Result<QuestionSlots, GrammarError> {
        let text = question.trim();
        let text = text.strip_suffix('?').unwrap_or(text).to_lowercase();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut found = Vec::new();
        let mut prefix = Vec::with_capacity(7);
        self.parse_from(
            AutomatonState::START,
            &tokens,
            verb,
            &mut prefix,
            &mut found,
        );
        match found.len() {
            1 => Ok(found.pop().unwrap()),
            0 => Err(GrammarError::Unparseable(question.to_string())),
            count => Err(GrammarError::Ambiguous {
                question: question.to_string(),
                count,
            }),
        }
    }

    fn parse_from(
        &self,
        state: AutomatonState,
        tokens: &[&str],
        verb: &InflectionTable,
        prefix: &mut Vec<usize>,
        found: &mut Vec<QuestionSlots>,
    ) {
        let Some(slot) = state.next_slot() else {
            if tokens.is_empty() {
                let values: Vec<SlotValue> = prefix
                    .iter()
                    .zip(Slot::ALL)
                    .map(|(&i, slot)| self.vocabulary(slot)[i].clone())
                    .collect();
                found.push(QuestionSlots::from_values(&values).expect("complete prefix"));
            }
            return;
        };
        for idx in 0..self.vocabulary(slot).len() {
            let width = if slot == Slot::Verb {
                match &self.vocabulary(slot)[idx] {
                    SlotValue::Verb(Some(v)) => {
                        let chain = v.aux_chain.as_str().split_whitespace();
                        match_words(chain.chain(verb.form(v.form).split_whitespace()), tokens)
                    }
                    _ => Some(0),
                }
            } else {
                match_words(
                    self.value_tokens(slot)[idx].iter().map(String::as_str),
                    tokens,
                )
            };
            let Some(width) = width else { continue };
            let Some(next) = self.transition_at(&state, idx).filter(|s| self.is_live(s)) else {
                continue;
            };
            prefix.push(idx);
            self.parse_from(next, &tokens[width..], verb, prefix, found);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::q;
    use super::super::*;

    fn table(stem: &str) -> InflectionTable {
        inflect(stem, &Lexicon::builtin())
    }

    #[test]
    fn renders_template_rows() {
        let g = Grammar::standard();
        let blame = q(
            Wh::What,
            Some("did"),
            Some(Placeholder::Someone),
            (AuxChain::None, VerbForm::Stem),
            Some(Placeholder::Something),
            Some("on"),
            None,
        );
        assert_eq!(
            g.render(&blame, &table("blame")),
            "What did someone blame something on?"
        );
        let put = q(
            Wh::Who,
            Some("might"),
            None,
            (AuxChain::None, VerbForm::Stem),
            Some(Placeholder::Something),
            None,
            Some(Misc::Somewhere),
        );
        assert_eq!(
            g.render(&put, &table("put")),
            "Who might put something somewhere?"
        );
        let long = q(
            Wh::HowLong,
            Some("might"),
            Some(Placeholder::Someone),
            (AuxChain::HaveBeen, VerbForm::PresentParticiple),
            None,
            None,
            None,
        );
        assert_eq!(
            g.render(&long, &table("wait")),
            "How long might someone have been waiting?"
        );
    }

    #[test]
    fn parse_inverts_render() {
        let g = Grammar::standard();
        let refuse = table("refuse");
        let row = q(
            Wh::When,
            Some("did"),
            Some(Placeholder::Someone),
            (AuxChain::None, VerbForm::Stem),
            None,
            Some("to"),
            Some(Misc::DoSomething),
        );
        let text = g.render(&row, &refuse);
        assert_eq!(text, "When did someone refuse to do something?");
        assert_eq!(g.parse_question(&text, &refuse).unwrap(), row);
    }

    #[test]
    fn parse_rejects_foreign_strings() {
        let g = Grammar::standard();
        let blame = table("blame");
        assert!(matches!(
            g.parse_question("What did been appeared?", &blame),
            Err(GrammarError::Unparseable(_))
        ));
        assert!(g.parse_question("Who blamed someone", &blame).is_ok());
        assert!(g
            .parse_question("Who blamed someone yesterday?", &blame)
            .is_err());
    }
}
