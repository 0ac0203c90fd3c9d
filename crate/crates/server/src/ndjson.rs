use axum::body::Bytes;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use fieldnet_core::error::{CloudError, RunError};
use fieldnet_core::wire::ErrorBody;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const CONTENT_TYPE: &str = "application/x-ndjson";

/// Response body of zero or more records, one JSON object per line.
pub struct Lines(pub String);

impl Lines {
    pub fn of<T: Serialize>(items: impl IntoIterator<Item = T>) -> Self {
        let mut out = String::new();
        for item in items {
            out.push_str(&serde_json::to_string(&item).expect("record serializes"));
            out.push('\n');
        }
        Lines(out)
    }

    pub fn one<T: Serialize>(item: T) -> Self {
        Self::of([item])
    }
}

impl IntoResponse for Lines {
    fn into_response(self) -> Response {
        let mut r = self.0.into_response();
        r.headers_mut()
            .insert(header::CONTENT_TYPE, HeaderValue::from_static(CONTENT_TYPE));
        r
    }
}

/// Parses a request body of one record per line. Blank lines are skipped.
pub fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<Vec<T>, ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ApiError::bad_request(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Parses a body holding exactly one record.
pub fn parse_one<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let mut v = parse(body)?;
    match v.len() {
        1 => Ok(v.remove(0)),
        n => Err(ApiError::bad_request(format!("expected one record, got {n}"))),
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<CloudError> for ApiError {
    fn from(e: CloudError) -> Self {
        let status = match &e {
            CloudError::UnknownNode(_)
            | CloudError::UnknownChannel { .. }
            | CloudError::UnknownGroup(_)
            | CloudError::UnknownKey { .. } => StatusCode::NOT_FOUND,
            CloudError::DuplicateNode(_) => StatusCode::CONFLICT,
            CloudError::EmptyGroup(_)
            | CloudError::PeriodTooShort { .. }
            | CloudError::BadRange { .. }
            | CloudError::Invalid(_) => StatusCode::BAD_REQUEST,
            CloudError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<RunError> for ApiError {
    fn from(e: RunError) -> Self {
        let status = match &e {
            RunError::Scenario(_) | RunError::Sim(_) | RunError::Node(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut r = Lines::one(ErrorBody { error: self.message }).into_response();
        *r.status_mut() = self.status;
        r
    }
}
