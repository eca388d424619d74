//! Crowdsourcing back end: validity aggregation, task lifecycle, worker
//! quality control and payment.

mod aggregate;
mod payment;
mod quality;
mod service;

pub use aggregate::{aggregate_validity, Stage, ValidityRule};
pub use payment::{
    compute_payment, corpus_cost, payments_cost, CostReport, PaymentKind, PaymentRecord,
};
pub use quality::{judgment_agrees, should_disqualify, update_quality, QualityConfig, WorkerStats};
pub use service::{
    autocomplete_options, completion_options, AnnotationService, Assignment, Clock,
    CompletionOption, Event, GenerationQa, Issue, ManualClock, QuestionIssue, ServiceConfig,
    ServiceState, ServiceStats, Submission, SystemClock, Task, TaskKind, TaskState, TaskView,
    ValidationJudgment,
};

use crate::corpus::CorpusError;
use crate::grammar::GrammarError;

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("need {need} judgments, have {have}")]
    InsufficientJudgments { have: usize, need: usize },
    #[error("negative question count {0}")]
    NegativeCount(i64),
    #[error("a generation task pays for at least one question")]
    EmptyGeneration,
    #[error("no {0} task available")]
    NoTaskAvailable(TaskKind),
    #[error("worker {0} is disqualified")]
    Disqualified(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown sentence {0}")]
    UnknownSentence(String),
    #[error("sentence {0} already loaded")]
    DuplicateSentence(String),
    #[error("task {task_id} is a {actual} task")]
    WrongKind { task_id: String, actual: TaskKind },
    #[error("worker {worker_id} holds no lease on task {task_id}")]
    NotLeased { task_id: String, worker_id: String },
    #[error("lease of worker {worker_id} on task {task_id} has expired")]
    LeaseExpired { task_id: String, worker_id: String },
    #[error("task {0} no longer accepts submissions")]
    TaskClosed(String),
    #[error("submission has no questions")]
    NoQuestions,
    #[error("expected {expected} judgments, got {got}")]
    JudgmentCount { expected: usize, got: usize },
    #[error("submission rejected: {}", issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Rejected { issues: Vec<QuestionIssue> },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {source}")]
    Log {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AnnotationError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::InsufficientJudgments { .. } => "insufficientJudgments",
            AnnotationError::NegativeCount(_) => "negativeCount",
            AnnotationError::EmptyGeneration => "emptyGeneration",
            AnnotationError::NoTaskAvailable(_) => "noTaskAvailable",
            AnnotationError::Disqualified(_) => "disqualified",
            AnnotationError::UnknownTask(_) => "unknownTask",
            AnnotationError::UnknownSentence(_) => "unknownSentence",
            AnnotationError::DuplicateSentence(_) => "duplicateSentence",
            AnnotationError::WrongKind { .. } => "wrongKind",
            AnnotationError::NotLeased { .. } => "notLeased",
            AnnotationError::LeaseExpired { .. } => "leaseExpired",
            AnnotationError::TaskClosed(_) => "taskClosed",
            AnnotationError::NoQuestions => "noQuestions",
            AnnotationError::JudgmentCount { .. } => "judgmentCount",
            AnnotationError::Rejected { .. } => "rejected",
            AnnotationError::Grammar(_) => "grammar",
            AnnotationError::Corpus(_) => "corpus",
            AnnotationError::Io(_) | AnnotationError::Log { .. } | AnnotationError::Json(_) => {
                "internal"
            }
        }
    }
}
