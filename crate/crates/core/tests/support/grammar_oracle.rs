//! The constraint table transcribed directly over slot tuples, plus a
//! brute-force walk of the full vocabulary product.

use qasrl::grammar::{
    AuxChain as C, AuxClass, Grammar, Misc, Slot, SlotValue, VerbForm as F, VerbSlot,
};

pub struct Oracle<'g> {
    pub grammar: &'g Grammar,
    vocab: Vec<&'g [SlotValue]>,
    /// Preposition indices after which `to do something` is ruled out.
    absorbs_to: Vec<bool>,
}

impl<'g> Oracle<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let vocab: Vec<&[SlotValue]> = Slot::ALL.iter().map(|&s| grammar.vocabulary(s)).collect();
        let preps = grammar.prepositions();
        let absorbs_to = vocab[Slot::Prep.index()]
            .iter()
            .map(|v| match v {
                SlotValue::Prep(Some(p)) => {
                    p == "to" || preps.iter().any(|q| *q == format!("{p} to"))
                }
                _ => false,
            })
            .collect();
        Oracle {
            grammar,
            vocab,
            absorbs_to,
        }
    }

    pub fn sizes(&self) -> [usize; 7] {
        std::array::from_fn(|i| self.vocab[i].len())
    }

    pub fn accepts(&self, idx: &[usize; 7]) -> bool {
        let value = |k: usize| &self.vocab[k][idx[k]];
        let SlotValue::Wh(wh) = value(0) else {
            unreachable!()
        };
        let SlotValue::Aux(aux) = value(1) else {
            unreachable!()
        };
        let SlotValue::Subj(subj) = value(2) else {
            unreachable!()
        };
        let SlotValue::Verb(verb) = value(3) else {
            unreachable!()
        };
        let SlotValue::Obj(obj) = value(4) else {
            unreachable!()
        };
        let SlotValue::Prep(prep) = value(5) else {
            unreachable!()
        };
        let SlotValue::Misc(misc) = value(6) else {
            unreachable!()
        };

        // (a)
        let Some(verb) = verb else { return false };
        if !VerbSlot::ALLOWED.contains(verb) {
            return false;
        }
        let aux_class = aux.map(|a| a.class()).unwrap_or(AuxClass::None);
        // (b)
        if subj.is_none() && (wh.is_adjunct() || aux_class == AuxClass::Do) {
            return false;
        }
        // (c)
        if subj.is_some() && aux.is_none() {
            return false;
        }
        // (d)
        if wh.is_adjunct() && subj.is_none() {
            return false;
        }
        // (e)
        let pair = (verb.aux_chain, verb.form);
        let agrees = match aux_class {
            AuxClass::Do => pair == (C::None, F::Stem),
            AuxClass::Be => [
                (C::None, F::PresentParticiple),
                (C::None, F::PastParticiple),
                (C::Being, F::PastParticiple),
            ]
            .contains(&pair),
            AuxClass::Have => [
                (C::None, F::PastParticiple),
                (C::Been, F::PresentParticiple),
                (C::Been, F::PastParticiple),
            ]
            .contains(&pair),
            AuxClass::Modal => [
                (C::None, F::Stem),
                (C::Be, F::PresentParticiple),
                (C::Be, F::PastParticiple),
                (C::Have, F::PastParticiple),
                (C::HaveBeen, F::PresentParticiple),
                (C::HaveBeen, F::PastParticiple),
            ]
            .contains(&pair),
            AuxClass::None => {
                subj.is_none()
                    && [(C::None, F::Past), (C::None, F::PresentSingular3rd)].contains(&pair)
            }
        };
        if !agrees {
            return false;
        }
        // (f)
        let passive = verb.form == F::PastParticiple
            && (matches!(verb.aux_chain, C::Be | C::Been | C::Being | C::HaveBeen)
                || (verb.aux_chain == C::None && aux_class == AuxClass::Be));
        let verbal_misc = matches!(
            misc,
            Some(
                Misc::DoSomething
                    | Misc::DoingSomething
                    | Misc::BeDoingSomething
                    | Misc::ToDoSomething
            )
        );
        if passive && prep.is_none() && !verbal_misc && obj.is_some() {
            return false;
        }
        // (g)
        if *misc == Some(Misc::ToDoSomething) && (prep.is_none() || self.absorbs_to[idx[5]]) {
            return false;
        }
        // (h)
        if matches!(misc, Some(Misc::Someone | Misc::Something)) && obj.is_none() && prep.is_none()
        {
            return false;
        }
        true
    }

    /// Visits every tuple of the product in lexicographic index order.
    pub fn for_each_tuple(&self, mut f: impl FnMut(&[usize; 7])) {
        let sizes = self.sizes();
        let mut idx = [0usize; 7];
        loop {
            f(&idx);
            let mut k = 6;
            loop {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    return;
                }
                k -= 1;
            }
        }
    }

    /// Walks the full product depth first. At every proper prefix, `visit`
    /// receives the prefix and the next-slot indices that have at least one
    /// accepted completion. Returns the number of accepted tuples.
    pub fn walk_prefixes(&self, mut visit: impl FnMut(&[usize], &[usize])) -> usize {
        let mut idx = [0usize; 7];
        self.walk(0, &mut idx, &mut visit)
    }

    fn walk(
        &self,
        depth: usize,
        idx: &mut [usize; 7],
        visit: &mut impl FnMut(&[usize], &[usize]),
    ) -> usize {
        if depth == 7 {
            return self.accepts(idx) as usize;
        }
        let mut live = Vec::new();
        let mut total = 0;
        for i in 0..self.vocab[depth].len() {
            idx[depth] = i;
            let below = self.walk(depth + 1, idx, visit);
            if below > 0 {
                live.push(i);
            }
            total += below;
        }
        visit(&idx[..depth], &live);
        total
    }
}
