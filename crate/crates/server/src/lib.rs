//! HTTP front end for the annotation service.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use qasrl::annotation::{
    autocomplete_options, AnnotationError, AnnotationService, CompletionOption, GenerationQa, ServiceStats,
    TaskKind, TaskView, ValidationJudgment,
};
use qasrl::grammar::{inflect, Grammar, Lexicon, QuestionSlots, Suggestion};

/// Structured error body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub detail: Value,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { code: code.to_string(), message: message.into(), detail: Value::Null, status: status.as_u16() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "badRequest", message)
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match &e {
            AnnotationError::NoTaskAvailable(_) | AnnotationError::UnknownTask(_) | AnnotationError::UnknownSentence(_) => {
                StatusCode::NOT_FOUND
            }
            AnnotationError::Disqualified(_) => StatusCode::FORBIDDEN,
            AnnotationError::NotLeased { .. }
            | AnnotationError::LeaseExpired { .. }
            | AnnotationError::TaskClosed(_)
            | AnnotationError::DuplicateSentence(_)
            | AnnotationError::WrongKind { .. } => StatusCode::CONFLICT,
            AnnotationError::Rejected { .. }
            | AnnotationError::NoQuestions
            | AnnotationError::JudgmentCount { .. }
            | AnnotationError::Grammar(_)
            | AnnotationError::Corpus(_)
            | AnnotationError::InsufficientJudgments { .. }
            | AnnotationError::NegativeCount(_)
            | AnnotationError::EmptyGeneration => StatusCode::UNPROCESSABLE_ENTITY,
            AnnotationError::Io(_) | AnnotationError::Log { .. } | AnnotationError::Json(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let mut api = ApiError::new(status, e.code(), e.to_string());
        if let AnnotationError::Rejected { issues } = &e {
            api.detail = serde_json::to_value(issues).unwrap_or(Value::Null);
        }
        api
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub worker: String,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationRequest {
    pub worker_id: String,
    pub qa_pairs: Vec<GenerationQa>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationRequest {
    pub worker_id: String,
    pub judgments: Vec<ValidationJudgment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmissionResponse {
    pub accepted: bool,
    pub task: TaskView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_task_id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct AutocompleteQuery {
    pub verb: String,
    /// Slot labels so far, separated by `|`.
    #[serde(default)]
    pub prefix: String,
    /// Questions already written, separated by `|`.
    #[serde(default)]
    pub prior: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutocompleteResponse {
    pub options: Vec<CompletionOption>,
    pub suggestions: Vec<Suggestion>,
}

pub fn router(service: Arc<AnnotationService>) -> Router {
    Router::new()
        .route("/api/task/next", get(next_task))
        .route("/api/task/{id}/generation", post(submit_generation))
        .route("/api/task/{id}/validation", post(submit_validation))
        .route("/api/autocomplete", get(autocomplete))
        .route("/api/stats", get(stats))
        .route("/api/export", get(export))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "notFound", "no such route") })
        .with_state(service)
}

async fn next_task(
    State(svc): State<Arc<AnnotationService>>,
    query: Result<Query<NextQuery>, QueryRejection>,
) -> ApiResult<TaskView> {
    let Query(q) = query?;
    let kind: TaskKind = q.kind.parse().map_err(ApiError::bad_request)?;
    let task = svc.next_task(&q.worker, kind)?;
    Ok(Json(svc.view(&task, Some(&q.worker))?))
}

async fn submit_generation(
    State(svc): State<Arc<AnnotationService>>,
    Path(id): Path<String>,
    body: Result<Json<GenerationRequest>, JsonRejection>,
) -> ApiResult<SubmissionResponse> {
    let Json(req) = body?;
    let task = svc.submit_generation(&id, &req.worker_id, &req.qa_pairs)?;
    Ok(Json(SubmissionResponse {
        accepted: true,
        validation_task_id: task.validation_task.clone(),
        task: svc.view(&task, Some(&req.worker_id))?,
    }))
}

async fn submit_validation(
    State(svc): State<Arc<AnnotationService>>,
    Path(id): Path<String>,
    body: Result<Json<ValidationRequest>, JsonRejection>,
) -> ApiResult<SubmissionResponse> {
    let Json(req) = body?;
    let task = svc.submit_validation(&id, &req.worker_id, &req.judgments)?;
    Ok(Json(SubmissionResponse { accepted: true, validation_task_id: None, task: svc.view(&task, Some(&req.worker_id))? }))
}

fn split_bar(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split('|').map(str::to_string).collect()
    }
}

async fn autocomplete(query: Result<Query<AutocompleteQuery>, QueryRejection>) -> ApiResult<AutocompleteResponse> {
    let Query(q) = query?;
    if q.verb.trim().is_empty() {
        return Err(ApiError::bad_request("verb is required"));
    }
    let grammar = Grammar::standard();
    let verb = inflect(&q.verb.trim().to_lowercase(), &Lexicon::builtin());
    let prior = split_bar(&q.prior)
        .iter()
        .map(|text| grammar.parse_question(text, &verb))
        .collect::<Result<Vec<QuestionSlots>, _>>()
        .map_err(AnnotationError::from)?;
    let (options, suggestions) = autocomplete_options(grammar, &verb, &split_bar(&q.prefix), &prior)?;
    Ok(Json(AutocompleteResponse { options, suggestions }))
}

async fn stats(State(svc): State<Arc<AnnotationService>>) -> ApiResult<ServiceStats> {
    Ok(Json(svc.stats()))
}

async fn export(State(svc): State<Arc<AnnotationService>>) -> Result<Response, ApiError> {
    let body = svc.export()?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Serves until interrupted.
pub async fn serve(service: Arc<AnnotationService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
