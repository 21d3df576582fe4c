use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use wiener_api::{ErrorBody, ErrorKind};

#[derive(Debug)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(ErrorKind::NotFound, what)
    }

    fn status(&self) -> StatusCode {
        match self.kind {
            ErrorKind::Config => StatusCode::BAD_REQUEST,
            ErrorKind::Input => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Divergence => StatusCode::CONFLICT,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<wiener_core::Error> for ApiError {
    fn from(err: wiener_core::Error) -> Self {
        use wiener_core::Error as E;
        let kind = match &err {
            E::Config(_) => ErrorKind::Config,
            E::Divergence { .. } => ErrorKind::Divergence,
            E::Io(_) => ErrorKind::Internal,
            _ => ErrorKind::Input,
        };
        Self::new(kind, err.to_string())
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(err: tokio::task::JoinError) -> Self {
        Self::new(ErrorKind::Internal, format!("worker failed: {err}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(message = %self.message, "request failed");
        }
        (status, Json(ErrorBody { kind: self.kind, message: self.message })).into_response()
    }
}
