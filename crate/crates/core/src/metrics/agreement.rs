use super::MetricsError;
use crate::corpus::AnswerSpan;

fn check_rate(name: &str, x: f64) -> Result<(), MetricsError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(MetricsError::InvalidInput(format!(
            "{name} = {x} outside [0, 1]"
        )))
    }
}

/// Kappa for a binary valid/invalid judgment from the valid rate and the
/// observed pairwise agreement, with chance agreement `p² + (1 − p)²`.
pub fn agreement_kappa(valid_rate: f64, observed_agreement: f64) -> Result<f64, MetricsError> {
    check_rate("valid rate", valid_rate)?;
    check_rate("observed agreement", observed_agreement)?;
    let chance = valid_rate * valid_rate + (1.0 - valid_rate) * (1.0 - valid_rate);
    if 1.0 - chance <= f64::EPSILON {
        return Err(MetricsError::DegenerateKappa);
    }
    Ok((observed_agreement - chance) / (1.0 - chance))
}

/// Fleiss' kappa from an items × categories matrix of rater counts. Every
/// item must have the same number of raters, at least two.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64, MetricsError> {
    let Some(first) = counts.first() else {
        return Err(MetricsError::InvalidInput("no items".into()));
    };
    let categories = first.len();
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(MetricsError::InvalidInput(
            "need at least two raters per item".into(),
        ));
    }
    let mut category_totals = vec![0usize; categories];
    let mut agreement_sum = 0.0;
    for (i, row) in counts.iter().enumerate() {
        if row.len() != categories || row.iter().sum::<usize>() != raters {
            return Err(MetricsError::InvalidInput(format!(
                "item {i} has a different shape or rater count"
            )));
        }
        let agreeing: usize = row.iter().map(|&c| c * c).sum::<usize>() - raters;
        agreement_sum += agreeing as f64 / (raters * (raters - 1)) as f64;
        for (total, &c) in category_totals.iter_mut().zip(row) {
            *total += c;
        }
    }
    let items = counts.len() as f64;
    let observed = agreement_sum / items;
    let chance: f64 = category_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * raters as f64);
            p * p
        })
        .sum();
    if 1.0 - chance <= f64::EPSILON {
        return Err(MetricsError::DegenerateKappa);
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Fraction of answer spans that exactly match a span given by another
/// annotator of the same question. `questions[q][a]` holds annotator `a`'s
/// spans; questions with fewer than two annotators are skipped.
pub fn span_agreement_rate(questions: &[Vec<Vec<AnswerSpan>>]) -> f64 {
    let mut total = 0usize;
    let mut matched = 0usize;
    for annotators in questions.iter().filter(|a| a.len() >= 2) {
        for (a, spans) in annotators.iter().enumerate() {
            for span in spans {
                total += 1;
                let hit = annotators
                    .iter()
                    .enumerate()
                    .any(|(b, other)| b != a && other.contains(span));
                matched += hit as usize;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}
