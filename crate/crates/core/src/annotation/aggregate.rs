use serde::{Deserialize, Serialize};

use super::AnnotationError;

/// How validator judgments combine into a validity decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "rule")]
pub enum ValidityRule {
    /// Valid iff all of the first `n` judgments are valid.
    AllOf { n: usize },
    /// Valid iff at least `k` of the first `n` judgments are valid.
    KOfN { k: usize, n: usize },
}

impl ValidityRule {
    pub const fn all_of(n: usize) -> Self {
        ValidityRule::AllOf { n }
    }

    pub fn required(&self) -> usize {
        match *self {
            ValidityRule::AllOf { n } | ValidityRule::KOfN { n, .. } => n,
        }
    }
}

/// Annotation stages with their default aggregation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stage {
    /// Original collection: both of two validators.
    Original,
    /// Expansion: all three validators.
    Expansion,
    /// Human evaluation of parser output: five of six.
    HumanEval,
}

impl Stage {
    pub fn rule(self) -> ValidityRule {
        match self {
            Stage::Original => ValidityRule::AllOf { n: 2 },
            Stage::Expansion => ValidityRule::AllOf { n: 3 },
            Stage::HumanEval => ValidityRule::KOfN { k: 5, n: 6 },
        }
    }

    /// Validators assigned per task.
    pub fn validators(self) -> usize {
        self.rule().required()
    }
}

/// Applies `rule` to the first `n` verdicts.
pub fn aggregate_validity(verdicts: &[bool], rule: ValidityRule) -> Result<bool, AnnotationError> {
    let n = rule.required();
    if n == 0 || verdicts.len() < n {
        return Err(AnnotationError::InsufficientJudgments {
            have: verdicts.len(),
            need: n,
        });
    }
    let valid = verdicts[..n].iter().filter(|&&v| v).count();
    Ok(match rule {
        ValidityRule::AllOf { .. } => valid == n,
        ValidityRule::KOfN { k, .. } => valid >= k,
    })
}
