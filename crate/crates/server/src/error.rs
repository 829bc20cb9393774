use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cmdb_core::store::StoreError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Every `code` an error body can carry.
pub const ERROR_CODES: [&str; 10] = [
    "bad_request",
    "bad_filter",
    "unauthorized",
    "not_found",
    "version_conflict",
    "too_large",
    "not_a_pdf",
    "invalid_edit",
    "store_unavailable",
    "internal",
];

/// JSON error body: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Option<Value>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code));
        Self {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
            detail: self.detail,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::InvalidRecord(report) | StoreError::InvalidEdit(report) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit", message)
                    .with_detail(serde_json::to_value(report).unwrap_or_default())
            }
            StoreError::NotFound(_) => ApiError::not_found(message),
            StoreError::VersionConflict { expected, current, .. } => {
                ApiError::new(StatusCode::CONFLICT, "version_conflict", message)
                    .with_detail(serde_json::json!({ "expected": expected, "current": current }))
            }
            StoreError::BadFilter(_) => ApiError::new(StatusCode::BAD_REQUEST, "bad_filter", message),
            StoreError::Unavailable(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store_unavailable", message),
            StoreError::Import { .. } | StoreError::Io(_) => ApiError::internal(message),
        }
    }
}
