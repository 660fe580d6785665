use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use crossing_core::{Error as CoreError, ValidationReport};

use crate::store::StoreError;

/// An error response: status plus a JSON body with at least an `error` field.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn invalid_document(report: &ValidationReport) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({
                "error": "invalid document",
                "report": report.to_string(),
                "violations": report.violations,
            }),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::not_found(e.to_string()),
            StoreError::AlreadyExists(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            StoreError::VersionConflict { expected, current } => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({
                    "error": "version conflict",
                    "expected_version": expected,
                    "current_version": current,
                }),
            },
            StoreError::InvalidId(_) => ApiError::unprocessable(e.to_string()),
            StoreError::Corrupt { .. } | StoreError::Io(_) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Document {
                ref path,
                ref message,
                line,
                column,
            } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": "invalid document",
                    "path": path,
                    "message": message,
                    "line": line,
                    "column": column,
                }),
            },
            CoreError::InvalidSpace(ref report) => ApiError::invalid_document(report),
            CoreError::BucketOutOfRange { .. } => ApiError::not_found(e.to_string()),
            CoreError::Overflow | CoreError::DivisionByZero | CoreError::Io(_) => ApiError::internal(e.to_string()),
            _ => ApiError::unprocessable(e.to_string()),
        }
    }
}
