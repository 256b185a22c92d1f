use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use slicevis_core::{Error, ErrorClass};

/// Error body: `{"error": {"class": .., "message": ..}}`.
#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    NotFound(String),
    BadRequest(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Core(e) => match e {
                Error::UnknownSession(_) | Error::UnknownModel(_) => StatusCode::NOT_FOUND,
                Error::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
                Error::Cancelled => StatusCode::CONFLICT,
                e => match e.class() {
                    ErrorClass::Data => StatusCode::UNPROCESSABLE_ENTITY,
                    ErrorClass::Usage => StatusCode::BAD_REQUEST,
                    ErrorClass::Model => StatusCode::BAD_GATEWAY,
                },
            },
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            ApiError::Core(e) => match e.class() {
                ErrorClass::Data => "data",
                ErrorClass::Model => "model",
                ErrorClass::Usage => "usage",
            },
            ApiError::NotFound(_) | ApiError::BadRequest(_) => "usage",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::Core(e) => write!(f, "{e}"),
            ApiError::NotFound(m) | ApiError::BadRequest(m) | ApiError::Internal(m) => f.write_str(m),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "class": self.class(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
