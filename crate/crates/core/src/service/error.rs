use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use crate::blueprint::ReportError;
use crate::engine::EngineError;
use crate::store::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    VersionConflict,
    Ineligible,
    Validation,
    Gated,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::VersionConflict => StatusCode::CONFLICT,
            ErrorCode::Ineligible | ErrorCode::Validation | ErrorCode::Gated => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { code, message: message.into(), details: Value::Null }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    pub fn gated(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Gated, message).with_details(json!({ "reason": "gated_by_verdict" }))
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::VersionConflict { expected, actual } => ApiError::new(ErrorCode::VersionConflict, message)
                .with_details(json!({ "expected_version": expected, "actual_version": actual })),
            EngineError::UnknownQuestion(_) | EngineError::UnknownOption { .. } => ApiError::new(ErrorCode::NotFound, message),
            EngineError::Ineligible { question_id, unmet } => ApiError::new(ErrorCode::Ineligible, message)
                .with_details(json!({ "question_id": question_id, "unmet": unmet })),
            EngineError::Gated { question_id } => {
                ApiError::gated(message).with_details(json!({ "reason": "gated_by_verdict", "question_id": question_id }))
            }
            EngineError::NotAnswered(_) => ApiError::validation(message),
            EngineError::CatalogMismatch { .. } => ApiError::new(ErrorCode::Internal, message),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) | StoreError::InvalidId(_) => ApiError::new(ErrorCode::NotFound, message),
            _ => ApiError::new(ErrorCode::Internal, message),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        ApiError::validation(e.to_string())
    }
}
