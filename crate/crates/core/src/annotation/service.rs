//! Task leasing, submission checks and bookkeeping, persisted as an
//! append-only event log with snapshots.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::payment::{compute_payment, payments_cost, CostReport, PaymentKind, PaymentRecord};
use super::quality::{update_quality, QualityConfig, WorkerStats};
use super::{AnnotationError, ValidityRule};
use crate::corpus::{
    write_corpus, AnswerSpan, Judgment, QaPair, QaSource, SentenceRecord, ValidityPolicy,
};
use crate::grammar::{Grammar, InflectionTable, QuestionSlots, Slot, Suggestion};

/// Milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that moves only when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Generation,
    Validation,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Generation => "generation",
            TaskKind::Validation => "validation",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "generation" => Ok(TaskKind::Generation),
            "validation" => Ok(TaskKind::Validation),
            other => Err(format!("unknown task kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Open,
    Assigned,
    Submitted,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assignment {
    pub worker_id: String,
    pub lease_expiry: u64,
    pub submitted: bool,
}

impl Assignment {
    fn is_active(&self, now: u64) -> bool {
        !self.submitted && self.lease_expiry > now
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Submission {
    pub worker_id: String,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    pub sentence_id: String,
    pub verb_index: usize,
    /// Submissions needed to complete the task.
    pub required_judgments: usize,
    pub state: TaskState,
    pub assignments: Vec<Assignment>,
    /// Questions written for this verb, with the writer's judgment first.
    pub questions: Vec<QaPair>,
    /// Writer of the questions under validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Validation task spawned by an accepted generation task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_task: Option<String>,
    #[serde(default)]
    pub submissions: Vec<Submission>,
}

impl Task {
    fn active_leases(&self, now: u64) -> usize {
        self.assignments.iter().filter(|a| a.is_active(now)).count()
    }

    fn assignment(&self, worker: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.worker_id == worker)
    }

    /// State as seen at `now`: an assigned task whose leases have all
    /// lapsed reads as open.
    pub fn state_at(&self, now: u64) -> TaskState {
        match self.state {
            TaskState::Assigned if self.active_leases(now) == 0 => TaskState::Open,
            s => s,
        }
    }

    fn can_lease(&self, worker: &str, now: u64) -> bool {
        if self.state == TaskState::Complete || self.assignment(worker).is_some_and(|a| a.submitted)
        {
            return false;
        }
        match self.kind {
            TaskKind::Generation => {
                self.state != TaskState::Submitted && self.active_leases(now) == 0
            }
            TaskKind::Validation => {
                self.generator.as_deref() != Some(worker)
                    && self.active_leases(now) + self.submissions.len() < self.required_judgments
            }
        }
    }
}

/// One question of a generation submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationQa {
    pub slots: QuestionSlots,
    pub spans: Vec<AnswerSpan>,
}

/// One validator's verdict on one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationJudgment {
    pub is_valid: bool,
    #[serde(default)]
    pub spans: Vec<AnswerSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Issue {
    Ungrammatical,
    NoSpans,
    InvalidWithSpans,
    SpanOutOfBounds { span: AnswerSpan },
    Overlap { other: usize, span: AnswerSpan },
    DuplicateQuestion { other: usize },
}

/// A problem with one question of a submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuestionIssue {
    pub question: usize,
    pub issue: Issue,
}

impl fmt::Display for QuestionIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.question;
        match &self.issue {
            Issue::Ungrammatical => write!(f, "question {q} is not a grammatical question"),
            Issue::NoSpans => write!(f, "question {q} has no answer span"),
            Issue::InvalidWithSpans => write!(f, "question {q} is marked invalid but has spans"),
            Issue::SpanOutOfBounds { span } => {
                write!(f, "question {q} span {span} is outside the sentence")
            }
            Issue::Overlap { other, span } => write!(
                f,
                "question {q} span {span} overlaps an answer to question {other}"
            ),
            Issue::DuplicateQuestion { other } => {
                write!(f, "question {q} repeats question {other}")
            }
        }
    }
}

/// Flags spans outside `len` tokens and spans overlapping another
/// question's spans; both questions of an overlapping pair are flagged.
fn span_issues(spans: &[&[AnswerSpan]], len: usize) -> Vec<QuestionIssue> {
    let mut issues = Vec::new();
    for (q, list) in spans.iter().enumerate() {
        for s in list.iter() {
            if s.end >= len || s.end < s.start {
                issues.push(QuestionIssue {
                    question: q,
                    issue: Issue::SpanOutOfBounds { span: *s },
                });
            }
        }
    }
    for (q, list) in spans.iter().enumerate() {
        for (other, other_list) in spans.iter().enumerate() {
            if other == q {
                continue;
            }
            if let Some(s) = list
                .iter()
                .find(|s| other_list.iter().any(|o| o.overlaps(s)))
            {
                issues.push(QuestionIssue {
                    question: q,
                    issue: Issue::Overlap { other, span: *s },
                });
            }
        }
    }
    issues
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceConfig {
    pub lease_ms: u64,
    /// Validators per generation task.
    pub validators: usize,
    pub quality: QualityConfig,
    /// Events between automatic snapshots; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            lease_ms: 30 * 60 * 1000,
            validators: 2,
            quality: QualityConfig::default(),
            snapshot_every: 1000,
        }
    }
}

impl ServiceConfig {
    pub fn rule(&self) -> ValidityRule {
        ValidityRule::all_of(self.validators)
    }
}

/// Every state change, in commit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    SentenceAdded { record: SentenceRecord },
    #[serde(rename_all = "camelCase")]
    Leased {
        task_id: String,
        worker_id: String,
        expires_at: u64,
    },
    #[serde(rename_all = "camelCase")]
    GenerationSubmitted {
        task_id: String,
        worker_id: String,
        questions: Vec<QaPair>,
    },
    #[serde(rename_all = "camelCase")]
    ValidationSubmitted {
        task_id: String,
        worker_id: String,
        judgments: Vec<Judgment>,
    },
}

/// Everything the service knows; a pure function of the event sequence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceState {
    pub sentences: BTreeMap<String, SentenceRecord>,
    pub tasks: BTreeMap<String, Task>,
    pub workers: BTreeMap<String, WorkerStats>,
    pub payments: Vec<PaymentRecord>,
    pub next_task: u64,
    pub events_applied: u64,
}

impl ServiceState {
    fn new_task_id(&mut self) -> String {
        self.next_task += 1;
        format!("task-{:06}", self.next_task)
    }

    pub fn apply(&mut self, event: &Event, config: &ServiceConfig) {
        self.events_applied += 1;
        match event {
            Event::SentenceAdded { record } => {
                for entry in &record.verb_entries {
                    let task_id = self.new_task_id();
                    self.tasks.insert(
                        task_id.clone(),
                        Task {
                            task_id,
                            kind: TaskKind::Generation,
                            sentence_id: record.sentence_id.clone(),
                            verb_index: entry.verb_index,
                            required_judgments: 1,
                            state: TaskState::Open,
                            assignments: Vec::new(),
                            questions: Vec::new(),
                            generator: None,
                            validation_task: None,
                            submissions: Vec::new(),
                        },
                    );
                }
                self.sentences
                    .insert(record.sentence_id.clone(), record.clone());
            }
            Event::Leased {
                task_id,
                worker_id,
                expires_at,
            } => {
                self.workers
                    .entry(worker_id.clone())
                    .or_insert_with(|| WorkerStats::new(worker_id));
                let task = self.tasks.get_mut(task_id).expect("lease of a known task");
                task.assignments.retain(|a| a.worker_id != *worker_id);
                task.assignments.push(Assignment {
                    worker_id: worker_id.clone(),
                    lease_expiry: *expires_at,
                    submitted: false,
                });
                task.state = task.state.max(TaskState::Assigned);
            }
            Event::GenerationSubmitted {
                task_id,
                worker_id,
                questions,
            } => {
                let task = self
                    .tasks
                    .get_mut(task_id)
                    .expect("submission to a known task");
                mark_submitted(task, worker_id);
                task.state = TaskState::Submitted;
                task.questions = questions.clone();
                let (sentence_id, verb_index) = (task.sentence_id.clone(), task.verb_index);
                match task.validation_task.clone() {
                    Some(v) => {
                        self.tasks.get_mut(&v).expect("spawned task").questions = questions.clone()
                    }
                    None => {
                        let v = self.new_task_id();
                        self.tasks
                            .get_mut(task_id)
                            .expect("known task")
                            .validation_task = Some(v.clone());
                        self.tasks.insert(
                            v.clone(),
                            Task {
                                task_id: v,
                                kind: TaskKind::Validation,
                                sentence_id,
                                verb_index,
                                required_judgments: config.validators,
                                state: TaskState::Open,
                                assignments: Vec::new(),
                                questions: questions.clone(),
                                generator: Some(worker_id.clone()),
                                validation_task: None,
                                submissions: Vec::new(),
                            },
                        );
                    }
                }
            }
            Event::ValidationSubmitted {
                task_id,
                worker_id,
                judgments,
            } => {
                let task = self
                    .tasks
                    .get_mut(task_id)
                    .expect("submission to a known task");
                mark_submitted(task, worker_id);
                let submission = Submission {
                    worker_id: worker_id.clone(),
                    judgments: judgments.clone(),
                };
                match task
                    .submissions
                    .iter_mut()
                    .find(|s| s.worker_id == *worker_id)
                {
                    Some(s) => *s = submission,
                    None => task.submissions.push(submission),
                }
                task.state = TaskState::Submitted;
                if task.submissions.len() >= task.required_judgments {
                    task.state = TaskState::Complete;
                    let task = task.clone();
                    self.complete_verb(&task, config);
                }
            }
        }
    }

    fn complete_verb(&mut self, task: &Task, config: &ServiceConfig) {
        let questions = completed_questions(task);
        let generation = self
            .tasks
            .values_mut()
            .find(|t| t.validation_task.as_deref() == Some(task.task_id.as_str()))
            .expect("validation task has a parent");
        generation.state = TaskState::Complete;
        let generation_id = generation.task_id.clone();
        let record = self
            .sentences
            .get_mut(&task.sentence_id)
            .expect("task of a known sentence");
        let entry = record
            .verb_entry_mut(task.verb_index)
            .expect("task of a known verb");
        entry.qa_pairs.extend(questions.iter().cloned());
        update_quality(
            &mut self.workers,
            &questions,
            config.rule(),
            &config.quality,
        );
        let k = questions.len();
        let generator = task.generator.clone().unwrap_or_default();
        self.payments.push(PaymentRecord {
            task_id: generation_id,
            cents: compute_payment(PaymentKind::Generation, k as i64)
                .expect("accepted tasks have questions"),
            worker_id: generator,
            kind: PaymentKind::Generation,
            questions: k,
        });
        for s in &task.submissions {
            self.payments.push(PaymentRecord {
                task_id: task.task_id.clone(),
                worker_id: s.worker_id.clone(),
                kind: PaymentKind::Validation,
                questions: k,
                cents: compute_payment(PaymentKind::Validation, k as i64).expect("non-negative"),
            });
        }
    }

    fn task(&self, task_id: &str) -> Result<&Task, AnnotationError> {
        self.tasks
            .get(task_id)
            .ok_or_else(|| AnnotationError::UnknownTask(task_id.to_string()))
    }

    pub fn stats(&self, now: u64, config: &ServiceConfig) -> ServiceStats {
        let mut tasks: BTreeMap<String, BTreeMap<TaskState, usize>> = BTreeMap::new();
        for t in self.tasks.values() {
            *tasks
                .entry(t.kind.to_string())
                .or_default()
                .entry(t.state_at(now))
                .or_default() += 1;
        }
        let verbs = self.sentences.values().map(|r| r.verb_entries.len()).sum();
        let policy = ValidityPolicy {
            generation: config.rule(),
            ..ValidityPolicy::default()
        };
        let valid_questions = self
            .sentences
            .values()
            .flat_map(|r| &r.verb_entries)
            .flat_map(|e| &e.qa_pairs)
            .filter(|qa| qa.is_valid_under(policy.rule_for(qa.source)))
            .count();
        ServiceStats {
            sentences: self.sentences.len(),
            tasks,
            workers: self.workers.values().cloned().collect(),
            cost: payments_cost(&self.payments, verbs, valid_questions),
            events: self.events_applied,
        }
    }
}

fn mark_submitted(task: &mut Task, worker: &str) {
    match task.assignments.iter_mut().find(|a| a.worker_id == worker) {
        Some(a) => a.submitted = true,
        None => task.assignments.push(Assignment {
            worker_id: worker.to_string(),
            lease_expiry: 0,
            submitted: true,
        }),
    }
}

/// The task's questions with each validator's judgment appended in
/// submission order.
fn completed_questions(task: &Task) -> Vec<QaPair> {
    task.questions
        .iter()
        .enumerate()
        .map(|(i, qa)| {
            let mut qa = qa.clone();
            qa.judgments
                .extend(task.submissions.iter().map(|s| s.judgments[i].clone()));
            qa
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceStats {
    pub sentences: usize,
    /// Task counts by kind, then state.
    pub tasks: BTreeMap<String, BTreeMap<TaskState, usize>>,
    pub workers: Vec<WorkerStats>,
    pub cost: CostReport,
    pub events: u64,
}

/// What a worker sees of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskView {
    pub task_id: String,
    pub kind: TaskKind,
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub verb_index: usize,
    pub inflections: InflectionTable,
    pub state: TaskState,
    pub lease_expiry: Option<u64>,
    /// Questions to judge, for validation tasks.
    pub questions: Vec<ViewQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewQuestion {
    pub slots: QuestionSlots,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Snapshot {
    config: ServiceConfig,
    state: ServiceState,
}

struct Log {
    dir: PathBuf,
    events: File,
}

impl Log {
    const EVENTS: &'static str = "events.jsonl";
    const SNAPSHOT: &'static str = "snapshot.json";

    fn append(&mut self, event: &Event) -> Result<(), AnnotationError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.events.write_all(&line)?;
        self.events.flush()?;
        Ok(())
    }

    fn snapshot(
        &self,
        config: &ServiceConfig,
        state: &ServiceState,
    ) -> Result<(), AnnotationError> {
        let tmp = self.dir.join("snapshot.json.tmp");
        let snap = Snapshot {
            config: *config,
            state: state.clone(),
        };
        fs::write(&tmp, serde_json::to_vec(&snap)?)?;
        File::open(&tmp)?.sync_all()?;
        fs::rename(tmp, self.dir.join(Self::SNAPSHOT))?;
        Ok(())
    }
}

/// Reads the event log, dropping a torn final line (one with no newline
/// that fails to parse) and truncating the file to the last whole event.
fn read_events(path: &Path) -> Result<Vec<Event>, AnnotationError> {
    let Ok(file) = File::open(path) else {
        return Ok(Vec::new());
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut good_bytes = 0u64;
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        number += 1;
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            good_bytes += read as u64;
            continue;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(e) if complete => {
                events.push(e);
                good_bytes += read as u64;
            }
            Ok(_) | Err(_) if !complete => {
                OpenOptions::new()
                    .write(true)
                    .open(path)?
                    .set_len(good_bytes)?;
                break;
            }
            Err(source) => {
                return Err(AnnotationError::Log {
                    line: number,
                    source,
                })
            }
            Ok(_) => unreachable!("complete lines handled above"),
        }
    }
    Ok(events)
}

/// Thread-safe annotation service. Mutations are serialized through one
/// commit point that appends to the event log before updating state.
pub struct AnnotationService {
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    state: RwLock<ServiceState>,
    log: Mutex<Option<Log>>,
    grammar: &'static Grammar,
}

impl AnnotationService {
    /// An in-memory service with no persistence.
    pub fn in_memory(config: ServiceConfig, clock: Arc<dyn Clock>) -> Self {
        AnnotationService {
            config,
            clock,
            state: RwLock::new(ServiceState::default()),
            log: Mutex::new(None),
            grammar: Grammar::standard(),
        }
    }

    /// Opens (or creates) a service persisted in `dir`, recovering state
    /// from the latest snapshot plus the events logged after it.
    pub fn open(
        dir: impl AsRef<Path>,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, AnnotationError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let state = Self::recover(&dir, &config)?;
        let events = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(Log::EVENTS))?;
        Ok(AnnotationService {
            config,
            clock,
            state: RwLock::new(state),
            log: Mutex::new(Some(Log { dir, events })),
            grammar: Grammar::standard(),
        })
    }

    /// State rebuilt from the files in `dir`.
    pub fn recover(dir: &Path, config: &ServiceConfig) -> Result<ServiceState, AnnotationError> {
        let mut state = match fs::read(dir.join(Log::SNAPSHOT)) {
            Ok(bytes) => serde_json::from_slice::<Snapshot>(&bytes)?.state,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ServiceState::default(),
            Err(e) => return Err(e.into()),
        };
        let events = read_events(&dir.join(Log::EVENTS))?;
        for event in events.iter().skip(state.events_applied as usize) {
            state.apply(event, config);
        }
        Ok(state)
    }

    /// State rebuilt from an event sequence alone.
    pub fn replay(events: &[Event], config: &ServiceConfig) -> ServiceState {
        let mut state = ServiceState::default();
        for e in events {
            state.apply(e, config);
        }
        state
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    /// A copy of the current state.
    pub fn state(&self) -> ServiceState {
        self.state.read().clone()
    }

    /// Writes a snapshot; a no-op without persistence.
    pub fn snapshot(&self) -> Result<(), AnnotationError> {
        let state = self.state.read();
        match self.log.lock().as_ref() {
            Some(log) => log.snapshot(&self.config, &state),
            None => Ok(()),
        }
    }

    fn commit(&self, state: &mut ServiceState, event: Event) -> Result<(), AnnotationError> {
        let mut log = self.log.lock();
        if let Some(log) = log.as_mut() {
            log.append(&event)?;
        }
        state.apply(&event, &self.config);
        if let Some(log) = log.as_ref() {
            let every = self.config.snapshot_every as u64;
            if every > 0 && state.events_applied % every == 0 {
                log.snapshot(&self.config, state)?;
            }
        }
        Ok(())
    }

    /// Loads a sentence and opens one generation task per verb entry.
    pub fn add_sentence(&self, record: SentenceRecord) -> Result<Vec<String>, AnnotationError> {
        record.validate_with(self.grammar)?;
        let mut state = self.state.write();
        if state.sentences.contains_key(&record.sentence_id) {
            return Err(AnnotationError::DuplicateSentence(record.sentence_id));
        }
        let first = state.next_task;
        self.commit(&mut state, Event::SentenceAdded { record })?;
        Ok((first + 1..=state.next_task)
            .map(|i| format!("task-{i:06}"))
            .collect())
    }

    /// Leases the first available task of `kind` to `worker`. A worker
    /// already holding an active lease of that kind gets the same task back.
    pub fn next_task(&self, worker: &str, kind: TaskKind) -> Result<Task, AnnotationError> {
        let mut state = self.state.write();
        if state.workers.get(worker).is_some_and(|w| w.disqualified) {
            return Err(AnnotationError::Disqualified(worker.to_string()));
        }
        let now = self.now();
        if let Some(t) = state
            .tasks
            .values()
            .find(|t| t.kind == kind && t.assignment(worker).is_some_and(|a| a.is_active(now)))
        {
            return Ok(t.clone());
        }
        let task_id = state
            .tasks
            .values()
            .find(|t| t.kind == kind && t.can_lease(worker, now))
            .map(|t| t.task_id.clone())
            .ok_or(AnnotationError::NoTaskAvailable(kind))?;
        let expires_at = now + self.config.lease_ms;
        self.commit(
            &mut state,
            Event::Leased {
                task_id: task_id.clone(),
                worker_id: worker.to_string(),
                expires_at,
            },
        )?;
        Ok(state.tasks[&task_id].clone())
    }

    fn check_lease(
        &self,
        task: &Task,
        worker: &str,
        kind: TaskKind,
        now: u64,
    ) -> Result<(), AnnotationError> {
        if task.kind != kind {
            return Err(AnnotationError::WrongKind {
                task_id: task.task_id.clone(),
                actual: task.kind,
            });
        }
        if task.state == TaskState::Complete {
            return Err(AnnotationError::TaskClosed(task.task_id.clone()));
        }
        let lease_err = |expired: bool| {
            let (task_id, worker_id) = (task.task_id.clone(), worker.to_string());
            if expired {
                AnnotationError::LeaseExpired { task_id, worker_id }
            } else {
                AnnotationError::NotLeased { task_id, worker_id }
            }
        };
        match task.assignment(worker) {
            None => Err(lease_err(false)),
            Some(a) if a.submitted => Ok(()),
            Some(a) if a.lease_expiry <= now => Err(lease_err(true)),
            Some(_) => Ok(()),
        }
    }

    /// Checks and records a worker's questions for a verb. On first
    /// acceptance a validation task is opened; a resubmission by the same
    /// worker replaces the questions while no validator has started.
    pub fn submit_generation(
        &self,
        task_id: &str,
        worker: &str,
        questions: &[GenerationQa],
    ) -> Result<Task, AnnotationError> {
        let mut state = self.state.write();
        let now = self.now();
        let task = state.task(task_id)?;
        self.check_lease(task, worker, TaskKind::Generation, now)?;
        if task.state == TaskState::Submitted {
            let started = task
                .validation_task
                .as_ref()
                .and_then(|v| state.tasks.get(v))
                .is_some_and(|v| !v.assignments.is_empty());
            if task.generator_of() != Some(worker) || started {
                return Err(AnnotationError::TaskClosed(task_id.to_string()));
            }
        }
        if questions.is_empty() {
            return Err(AnnotationError::NoQuestions);
        }
        let record = &state.sentences[&task.sentence_id];
        let mut issues = Vec::new();
        for (i, q) in questions.iter().enumerate() {
            if !self.grammar.is_valid(&q.slots) {
                issues.push(QuestionIssue {
                    question: i,
                    issue: Issue::Ungrammatical,
                });
            }
            if q.spans.is_empty() {
                issues.push(QuestionIssue {
                    question: i,
                    issue: Issue::NoSpans,
                });
            }
            if let Some(other) = questions[..i].iter().position(|p| p.slots == q.slots) {
                issues.push(QuestionIssue {
                    question: i,
                    issue: Issue::DuplicateQuestion { other },
                });
            }
        }
        let spans: Vec<&[AnswerSpan]> = questions.iter().map(|q| q.spans.as_slice()).collect();
        issues.extend(span_issues(&spans, record.tokens.len()));
        if !issues.is_empty() {
            issues.sort_by_key(|i| i.question);
            return Err(AnnotationError::Rejected { issues });
        }
        let qa_pairs: Vec<QaPair> = questions
            .iter()
            .map(|q| QaPair {
                slots: q.slots.clone(),
                source: QaSource::Generation,
                judgments: vec![Judgment::valid(worker, q.spans.clone())],
            })
            .collect();
        let event = Event::GenerationSubmitted {
            task_id: task_id.to_string(),
            worker_id: worker.to_string(),
            questions: qa_pairs,
        };
        self.commit(&mut state, event)?;
        Ok(state.tasks[task_id].clone())
    }

    /// Checks and records one validator's judgments, one per question in
    /// order. Resubmission before completion replaces the earlier one.
    pub fn submit_validation(
        &self,
        task_id: &str,
        worker: &str,
        judgments: &[ValidationJudgment],
    ) -> Result<Task, AnnotationError> {
        let mut state = self.state.write();
        let now = self.now();
        let task = state.task(task_id)?;
        self.check_lease(task, worker, TaskKind::Validation, now)?;
        if judgments.len() != task.questions.len() {
            return Err(AnnotationError::JudgmentCount {
                expected: task.questions.len(),
                got: judgments.len(),
            });
        }
        let record = &state.sentences[&task.sentence_id];
        let mut issues = Vec::new();
        for (i, j) in judgments.iter().enumerate() {
            if j.is_valid && j.spans.is_empty() {
                issues.push(QuestionIssue {
                    question: i,
                    issue: Issue::NoSpans,
                });
            }
            if !j.is_valid && !j.spans.is_empty() {
                issues.push(QuestionIssue {
                    question: i,
                    issue: Issue::InvalidWithSpans,
                });
            }
        }
        let spans: Vec<&[AnswerSpan]> = judgments.iter().map(|j| j.spans.as_slice()).collect();
        issues.extend(span_issues(&spans, record.tokens.len()));
        if !issues.is_empty() {
            issues.sort_by_key(|i| i.question);
            return Err(AnnotationError::Rejected { issues });
        }
        let judgments: Vec<Judgment> = judgments
            .iter()
            .map(|j| Judgment {
                worker_id: worker.to_string(),
                is_valid: j.is_valid,
                spans: j.spans.clone(),
            })
            .collect();
        let completes = task
            .submissions
            .iter()
            .filter(|s| s.worker_id != worker)
            .count()
            + 1
            >= task.required_judgments;
        if completes {
            let mut preview = task.clone();
            preview.submissions.retain(|s| s.worker_id != worker);
            preview.submissions.push(Submission {
                worker_id: worker.to_string(),
                judgments: judgments.clone(),
            });
            let mut record = record.clone();
            record
                .verb_entry_mut(task.verb_index)
                .ok_or_else(|| AnnotationError::UnknownSentence(task.sentence_id.clone()))?
                .qa_pairs
                .extend(completed_questions(&preview));
            record.validate_with(self.grammar)?;
        }
        let event = Event::ValidationSubmitted {
            task_id: task_id.to_string(),
            worker_id: worker.to_string(),
            judgments,
        };
        self.commit(&mut state, event)?;
        Ok(state.tasks[task_id].clone())
    }

    pub fn task(&self, task_id: &str) -> Result<Task, AnnotationError> {
        self.state.read().task(task_id).cloned()
    }

    pub fn view(&self, task: &Task, worker: Option<&str>) -> Result<TaskView, AnnotationError> {
        let state = self.state.read();
        let record = state
            .sentences
            .get(&task.sentence_id)
            .ok_or_else(|| AnnotationError::UnknownSentence(task.sentence_id.clone()))?;
        let entry = record
            .verb_entry(task.verb_index)
            .ok_or_else(|| AnnotationError::UnknownSentence(task.sentence_id.clone()))?;
        let questions = match task.kind {
            TaskKind::Generation => Vec::new(),
            TaskKind::Validation => task
                .questions
                .iter()
                .map(|qa| ViewQuestion {
                    slots: qa.slots.clone(),
                    text: self.grammar.render(&qa.slots, &entry.inflections),
                })
                .collect(),
        };
        Ok(TaskView {
            task_id: task.task_id.clone(),
            kind: task.kind,
            sentence_id: task.sentence_id.clone(),
            tokens: record.tokens.clone(),
            verb_index: task.verb_index,
            inflections: entry.inflections.clone(),
            state: task.state_at(self.now()),
            lease_expiry: worker
                .and_then(|w| task.assignment(w))
                .map(|a| a.lease_expiry),
            questions,
        })
    }

    pub fn stats(&self) -> ServiceStats {
        self.state.read().stats(self.now(), &self.config)
    }

    pub fn worker(&self, worker: &str) -> Option<WorkerStats> {
        self.state.read().workers.get(worker).cloned()
    }

    /// The annotated corpus in sentence-id order.
    pub fn corpus(&self) -> Vec<SentenceRecord> {
        self.state.read().sentences.values().cloned().collect()
    }

    pub fn export(&self) -> Result<Vec<u8>, AnnotationError> {
        let mut out = Vec::new();
        write_corpus(&mut out, &self.corpus())?;
        Ok(out)
    }
}

impl Task {
    fn generator_of(&self) -> Option<&str> {
        self.questions
            .first()
            .and_then(|q| q.generator())
            .map(|j| j.worker_id.as_str())
    }
}

/// One option for the next slot of a partial question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompletionOption {
    pub slot: String,
    /// Wire label, as accepted in prefixes.
    pub label: String,
    /// Surface words for the verb at hand.
    pub text: String,
}

/// Options for the slot after `prefix` (wire labels in slot order).
pub fn completion_options(
    grammar: &Grammar,
    verb: &InflectionTable,
    prefix: &[String],
) -> Result<Vec<CompletionOption>, AnnotationError> {
    let mut indices = Vec::with_capacity(prefix.len());
    for (k, label) in prefix.iter().enumerate() {
        let slot = *Slot::ALL
            .get(k)
            .ok_or(crate::grammar::GrammarError::Arity(prefix.len()))?;
        let index = grammar.index_by_label(slot, label).ok_or_else(|| {
            crate::grammar::GrammarError::UnknownValue {
                slot: slot.name(),
                value: label.clone(),
            }
        })?;
        indices.push(index);
    }
    let next = grammar.autocomplete_indices(&indices)?;
    let Some(&slot) = Slot::ALL.get(prefix.len()) else {
        return Ok(Vec::new());
    };
    let vocab = grammar.vocabulary(slot);
    Ok(next
        .into_iter()
        .map(|i| CompletionOption {
            slot: slot.name().to_string(),
            label: vocab[i].label(),
            text: crate::grammar::surface(&vocab[i], verb),
        })
        .collect())
}

/// [`completion_options`] together with suggestions for argument positions
/// not yet covered by `prior`.
pub fn autocomplete_options(
    grammar: &Grammar,
    verb: &InflectionTable,
    prefix: &[String],
    prior: &[QuestionSlots],
) -> Result<(Vec<CompletionOption>, Vec<Suggestion>), AnnotationError> {
    Ok((
        completion_options(grammar, verb, prefix)?,
        grammar.auto_suggest(prior, verb),
    ))
}
