use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::{DateTime, Utc};
use ckb_core::breach::{assess_notification, Assessment, BreachCase};
use ckb_core::disclosure::{generate_disclosure, DisclosureDocument, DisclosureMeta};
use ckb_core::engine::{self, ChallengeResult, NextStep, SessionStatus, Verdict};
use ckb_core::explain::{build_trace, redact_trace, render_argument, DisclosureLevel};
use ckb_core::journal::valid_session_id;
use ckb_core::textio::{expected_form, value_from_json};
use ckb_core::validate::{validate_source, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::AppState;

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

/// `axum::Json` with rejections reported in the service's error shape.
pub struct Json<T>(pub T);

impl<T, S> FromRequest<S> for Json<T>
where
    axum::Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(v)) => Ok(Json(v)),
            Err(e) => Err(ApiError::bad_request(e.body_text())),
        }
    }
}

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/kb/validate", post(validate))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/verdict", get(verdict))
        .route("/sessions/{id}/explanation", get(explanation))
        .route("/sessions/{id}/exceptions", post(exception))
        .route("/breach-assessments", post(breach_assessment))
        .route("/disclosures", post(disclosure))
        .with_state(state)
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    kb_hash: String,
}

async fn health(State(state): State<Shared>) -> Json<Health> {
    Json(Health { status: "ok", kb_hash: state.kb_hash.clone() })
}

#[derive(Deserialize)]
struct ValidateRequest {
    source: String,
    #[serde(default)]
    file: Option<String>,
}

async fn validate(Json(req): Json<ValidateRequest>) -> Json<ValidationReport> {
    let file = req.file.as_deref().unwrap_or("<input>");
    Json(validate_source(&req.source, file))
}

#[derive(Deserialize)]
struct CreateSession {
    goal: String,
    #[serde(default)]
    session_id: Option<String>,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(
    State(state): State<Shared>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let id = match req.session_id {
        Some(id) if !valid_session_id(&id) => {
            return Err(ApiError::bad_request(format!(
                "invalid session id {id:?}: use 1-128 ASCII letters, digits, '-' or '_'"
            )))
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().simple().to_string(),
    };
    if !state.kb.goals.contains(&req.goal) {
        return Err(ApiError::not_found(format!("unknown goal {}", req.goal)));
    }
    let session = engine::start_session(&state.kb, &req.goal, id.clone(), Utc::now())?;
    state.insert(session).await?;
    tracing::info!(session = %id, goal = %req.goal, "session started");
    Ok((StatusCode::CREATED, Json(Created { session_id: id })))
}

async fn next(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<NextStep>> {
    let entry = state.session(&id)?;
    let mut entry = entry.lock().await;
    let mut session = entry.session.clone();
    let step = engine::next_question(&state.kb, &mut session, Utc::now());
    state.commit(&mut entry, session).await?;
    Ok(Json(step))
}

#[derive(Deserialize)]
struct AnswerRequest {
    question_id: String,
    value: serde_json::Value,
}

#[derive(Serialize)]
struct AnswerStatus {
    session_id: String,
    status: SessionStatus,
    answered: usize,
    next: NextStep,
}

async fn answer(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> ApiResult<Json<AnswerStatus>> {
    let question = state
        .kb
        .question(&req.question_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown question {}", req.question_id)))?;
    let value = value_from_json(question, &req.value).ok_or_else(|| {
        ApiError::type_mismatch(format!("question {} expects {}", question.id, expected_form(&question.answer_kind)))
    })?;
    let entry = state.session(&id)?;
    let mut entry = entry.lock().await;
    let mut session = entry.session.clone();
    let now = Utc::now();
    engine::submit_answer(&state.kb, &mut session, &req.question_id, value, now)?;
    let next = engine::next_question(&state.kb, &mut session, now);
    state.commit(&mut entry, session).await?;
    let s = &entry.session;
    Ok(Json(AnswerStatus { session_id: id, status: s.status, answered: s.answers.len(), next }))
}

async fn verdict(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Verdict>> {
    let entry = state.session(&id)?;
    let entry = entry.lock().await;
    Ok(Json(engine::evaluate_goal(&state.kb, &entry.session)))
}

#[derive(Deserialize)]
struct ExplanationQuery {
    level: Option<String>,
    /// Render the argument document for this pattern instead of the rule trace.
    pattern: Option<String>,
}

async fn explanation(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ExplanationQuery>,
) -> ApiResult<Response> {
    let level: DisclosureLevel = match q.level.as_deref() {
        Some(l) => l.parse().map_err(ApiError::bad_request)?,
        None => DisclosureLevel::Full,
    };
    let entry = state.session(&id)?;
    let entry = entry.lock().await;
    if let Some(pattern) = q.pattern {
        let doc = render_argument(&state.kb, &pattern, &entry.session)?;
        return Ok(Json(doc).into_response());
    }
    let trace = build_trace(&state.kb, &entry.session)?;
    Ok(Json(redact_trace(&trace, level)).into_response())
}

#[derive(Deserialize)]
struct ExceptionRequest {
    pattern_id: String,
    exception_id: String,
}

/// Evaluate an exceptional case against the session's facts. Answers are
/// never changed; open sessions journal the challenge.
async fn exception(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<ExceptionRequest>,
) -> ApiResult<Json<ChallengeResult>> {
    let entry = state.session(&id)?;
    let mut entry = entry.lock().await;
    let result = engine::apply_exception(&state.kb, &entry.session, &req.pattern_id, &req.exception_id)?;
    let mut session = entry.session.clone();
    if session.record_exception(&result, Utc::now()) {
        state.commit(&mut entry, session).await?;
    }
    Ok(Json(result))
}

#[derive(Deserialize)]
struct BreachRequest {
    case_id: String,
    awareness_time: DateTime<Utc>,
    /// Plain JSON answers keyed by question id.
    #[serde(default)]
    facts: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    narrative: String,
    /// Evaluation time for the lateness check; defaults to the server clock.
    #[serde(default)]
    now: Option<DateTime<Utc>>,
}

async fn breach_assessment(State(state): State<Shared>, Json(req): Json<BreachRequest>) -> ApiResult<Json<Assessment>> {
    let mut facts = ckb_core::eval::Facts::new();
    for (qid, raw) in &req.facts {
        let question = state.kb.question(qid).ok_or_else(|| ApiError::not_found(format!("unknown question {qid}")))?;
        let value = value_from_json(question, raw).ok_or_else(|| {
            ApiError::type_mismatch(format!("{qid}: expected {}", expected_form(&question.answer_kind)))
        })?;
        facts.insert(qid.clone(), value);
    }
    let case = BreachCase { case_id: req.case_id, awareness_time: req.awareness_time, facts, narrative: req.narrative };
    let assessment = assess_notification(&state.kb, &case, req.now.unwrap_or_else(Utc::now))?;
    Ok(Json(assessment))
}

async fn disclosure(Json(meta): Json<DisclosureMeta>) -> ApiResult<Json<DisclosureDocument>> {
    Ok(Json(generate_disclosure(&meta)?))
}
