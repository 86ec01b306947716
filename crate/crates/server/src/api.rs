use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde_json::json;

use crate::media::{content_type, read_span, ByteRange};
use crate::state::{ApiError, CreateSession, Registry, SubmitRating};

pub type Shared = Arc<Mutex<Registry>>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.code, "message": self.message }));
        let mut resp = (self.status, body).into_response();
        if let Some(size) = self.unsatisfied_size {
            let v = HeaderValue::from_str(&format!("bytes */{size}")).expect("ascii");
            resp.headers_mut().insert(header::CONTENT_RANGE, v);
        }
        resp
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.body_text()))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/ratings", post(submit_rating))
        .route("/media/{token}", get(media))
        .route("/studies/{id}/export.csv", get(export))
        .with_state(state)
}

async fn create_session(
    State(st): State<Shared>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let info = st.lock().create_session(req)?;
    tracing::info!(session = %info.session_id, subject = %info.subject_id, total = info.total, "session created");
    Ok((StatusCode::CREATED, Json(info)))
}

async fn session_info(State(st): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(st.lock().session(&id)?.info()))
}

async fn next_item(State(st): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(st.lock().next_item(&id)?))
}

async fn submit_rating(
    State(st): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<SubmitRating>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    Ok(Json(st.lock().submit_rating(&id, req)?))
}

async fn media(State(st): State<Shared>, Path(token): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let range = match headers.get(header::RANGE) {
        None => None,
        Some(v) => Some(v.to_str().ok().and_then(ByteRange::parse).ok_or_else(|| {
            ApiError::new(
                StatusCode::RANGE_NOT_SATISFIABLE,
                "bad_range",
                "only a single bytes range is supported",
            )
        })?),
    };
    let grant = st.lock().open_media(&token, range)?;
    let bytes = read_span(&grant.path, grant.start, grant.end)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let mut resp = bytes.into_response();
    *resp.status_mut() = if grant.partial {
        StatusCode::PARTIAL_CONTENT
    } else {
        StatusCode::OK
    };
    let h = resp.headers_mut();
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static(content_type(&grant.path)),
    );
    h.insert(header::ACCEPT_RANGES, HeaderValue::from_static("bytes"));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    if grant.partial {
        let v = format!("bytes {}-{}/{}", grant.start, grant.end - 1, grant.size);
        h.insert(header::CONTENT_RANGE, HeaderValue::from_str(&v).expect("ascii"));
    }
    Ok(resp)
}

async fn export(State(st): State<Shared>, Path(study): Path<String>) -> Result<Response, ApiError> {
    let reg = st.lock();
    if !reg.studies().contains(study.as_str()) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_study",
            format!("no study '{study}'"),
        ));
    }
    let csv = reg.export_csv(&study)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
