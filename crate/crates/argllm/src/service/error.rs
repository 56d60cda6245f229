use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use argllm_core::QbafError;

use crate::builder::BuildError;
use crate::format;
use crate::gateway::GatewayError;
use crate::ingest::IngestError;

/// JSON error body `{code, message, field?}` plus an HTTP status.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
    /// Extra members merged into the body, e.g. a partial-build report.
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), field: None, details: None }
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session {id}"))
    }

    pub fn invalid_settings(field: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-settings", message).field(field)
    }

    pub fn invalid_payload(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-payload", message)
    }

    pub fn no_qbaf() -> Self {
        ApiError::new(StatusCode::CONFLICT, "no-qbaf", "submit a claim first")
    }

    pub fn conflict() -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            "the session changed while the language model was working; the result was discarded",
        )
    }

    pub fn storage(err: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage-failure", err.to_string())
    }

    pub fn body(&self) -> Value {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(field) = &self.field {
            body["field"] = json!(field);
        }
        if let Some(Value::Object(extra)) = &self.details {
            for (k, v) in extra {
                body[k] = v.clone();
            }
        }
        body
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<QbafError> for ApiError {
    fn from(err: QbafError) -> Self {
        let status = match &err {
            QbafError::UnknownParent(_) | QbafError::UnknownArgument(_) => StatusCode::NOT_FOUND,
            QbafError::DepthLimitExceeded { .. } | QbafError::DuplicateArgument(_) => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let field = match &err {
            QbafError::EmptyText | QbafError::TextTooLong(_) => Some("text"),
            QbafError::InvalidScore(_) => Some("base_score"),
            _ => None,
        };
        let mut api = ApiError::new(status, err.code(), err.to_string());
        api.field = field.map(str::to_owned);
        api
    }
}

impl From<GatewayError> for ApiError {
    fn from(err: GatewayError) -> Self {
        match err {
            GatewayError::Config(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, err.code(), err.to_string()).field("backend")
            }
            GatewayError::InvalidRequest(_) => ApiError::invalid_payload(err.to_string()),
            _ => ApiError::new(StatusCode::BAD_GATEWAY, err.code(), err.to_string()),
        }
    }
}

impl From<BuildError> for ApiError {
    fn from(err: BuildError) -> Self {
        match err {
            BuildError::InvalidConfig { field, message } => ApiError::invalid_settings(field, message),
            BuildError::EmptyClaim => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty-claim", "the claim must not be empty")
                    .field("text")
            }
            BuildError::UnknownDocument(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown-document", format!("no document {id}"))
            }
            BuildError::Qbaf(e) => e.into(),
            BuildError::Gateway { source, partial } => {
                let message = format!(
                    "{source} (while building {})",
                    partial.failed_node.as_ref().map_or_else(|| "the claim".to_owned(), |id| id.to_string())
                );
                let mut api = ApiError::from(source);
                if api.status == StatusCode::BAD_GATEWAY {
                    api.message = message;
                    api.details = Some(json!({
                        "partial": {
                            "failed_node": partial.failed_node.as_ref().map(|id| id.as_str()),
                            "completed": partial.completed.as_ref().map(format::QbafDoc::from),
                        }
                    }));
                }
                api
            }
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(err: IngestError) -> Self {
        let status = match err {
            IngestError::NotAPdf => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            IngestError::TooLarge(_) => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, err.code(), err.to_string()).field("file")
    }
}
