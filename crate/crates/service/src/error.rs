use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ckb_core::breach::BreachError;
use ckb_core::disclosure::DisclosureError;
use ckb_core::engine::EngineError;
use ckb_core::explain::TraceError;
use ckb_core::journal::JournalError;
use serde::Serialize;

/// An error response: `{"error": <code>, "message": <text>}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn type_mismatch(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "type_mismatch", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body { error: self.code, message: &self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::UnknownGoal(_)
            | EngineError::UnknownQuestion(_)
            | EngineError::UnknownPattern(_)
            | EngineError::UnknownException { .. } => ApiError::not_found(message),
            EngineError::SessionConcluded(_) | EngineError::AlreadyAnswered(_) | EngineError::NotRelevant(_) => {
                ApiError::conflict(message)
            }
            EngineError::TypeMismatch { .. } => ApiError::type_mismatch(message),
            EngineError::NotInPlan(_) | EngineError::UnboundException(_) => ApiError::bad_request(message),
        }
    }
}

impl From<TraceError> for ApiError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::NothingDetermined => ApiError::conflict(e.to_string()),
            TraceError::Engine(e) => e.into(),
        }
    }
}

impl From<BreachError> for ApiError {
    fn from(e: BreachError) -> Self {
        let message = e.to_string();
        match e {
            BreachError::TypeMismatch { .. } | BreachError::NoCategory(_) => ApiError::type_mismatch(message),
            BreachError::UnknownQuestion(_) => ApiError::not_found(message),
            BreachError::MissingExceptionRule(_) => ApiError::internal(message),
            _ => ApiError::bad_request(message),
        }
    }
}

impl From<DisclosureError> for ApiError {
    fn from(e: DisclosureError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl From<JournalError> for ApiError {
    fn from(e: JournalError) -> Self {
        let message = e.to_string();
        match e {
            JournalError::MissingSession(_) => ApiError::not_found(message),
            JournalError::InvalidSessionId(_) => ApiError::bad_request(message),
            JournalError::SequenceConflict { .. }
            | JournalError::AfterConclusion(_)
            | JournalError::KbMismatch { .. }
            | JournalError::InvalidEvent { .. }
            | JournalError::Corrupt { .. } => ApiError::conflict(message),
            JournalError::Io(_) => ApiError::internal(message),
        }
    }
}
