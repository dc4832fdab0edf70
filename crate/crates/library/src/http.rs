//! JSON over HTTP. Each request opens its own connections, resolves the
//! `X-User` header to a card id and calls the configured service.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use viewcap::{Error, RootAuthority};

use crate::service::{card_id, Service};

pub const USER_HEADER: &str = "x-user";

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("missing or unknown user")]
    Unauthorized,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Core(Error::Contract(_) | Error::ViewConstraintViolation { .. }) => StatusCode::FORBIDDEN,
            ApiError::Core(e) if e.is_validation() => StatusCode::BAD_REQUEST,
            ApiError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub auth: Arc<RootAuthority>,
    pub service: Arc<dyn Service>,
}

pub fn router(auth: RootAuthority, service: Box<dyn Service>) -> Router {
    Router::new()
        .route("/reserve", post(reserve))
        .route("/reservations", get(my_reservations))
        .route("/reservations/{r_id}", delete(remove_reservation))
        .route("/search", get(search))
        .route("/books/{book_id}/reservation-count", get(reservation_count))
        .with_state(AppState {
            auth: Arc::new(auth),
            service: Arc::from(service),
        })
}

fn id(text: &str) -> Result<String, ApiError> {
    let t = text.trim();
    if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) {
        Ok(t.to_string())
    } else {
        Err(ApiError::BadRequest(format!("not an id: {text:?}")))
    }
}

/// Runs `f` on a blocking thread with a fresh session and the caller's card.
async fn call<T: Send + 'static>(
    state: AppState,
    headers: &HeaderMap,
    f: impl FnOnce(&dyn Service, &RootAuthority, i64) -> viewcap::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    let user = headers
        .get(USER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .ok_or(ApiError::Unauthorized)?;
    tokio::task::spawn_blocking(move || {
        let session = state.auth.session();
        let card = card_id(&session, &user)?.ok_or(ApiError::Unauthorized)?;
        Ok(f(state.service.as_ref(), &session, card)?)
    })
    .await
    .map_err(|e| ApiError::Core(Error::Io(e.to_string())))?
}

#[derive(Deserialize)]
struct ReserveRequest {
    book_id: serde_json::Value,
}

async fn reserve(State(s): State<AppState>, headers: HeaderMap, Json(req): Json<ReserveRequest>) -> Result<Response, ApiError> {
    let book = match &req.book_id {
        serde_json::Value::String(t) => id(t)?,
        serde_json::Value::Number(n) => id(&n.to_string())?,
        other => return Err(ApiError::BadRequest(format!("not an id: {other}"))),
    };
    let n = call(s, &headers, move |svc, auth, card| svc.reserve(auth, card, &book)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "reserved": n }))).into_response())
}

async fn my_reservations(State(s): State<AppState>, headers: HeaderMap) -> Result<Json<String>, ApiError> {
    call(s, &headers, |svc, auth, card| svc.my_reservations(auth, card)).await.map(Json)
}

async fn remove_reservation(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(r_id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let r_id = id(&r_id)?;
    let n = call(s, &headers, move |svc, auth, card| svc.remove_reservation(auth, card, &r_id)).await?;
    Ok(Json(json!({ "deleted": n })))
}

#[derive(Deserialize)]
struct SearchParams {
    fname: String,
    lname: String,
}

async fn search(
    State(s): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<SearchParams>,
) -> Result<Json<String>, ApiError> {
    call(s, &headers, move |svc, auth, card| svc.search_author(auth, card, &q.fname, &q.lname))
        .await
        .map(Json)
}

async fn reservation_count(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(book_id): Path<String>,
) -> Result<Json<String>, ApiError> {
    let book = id(&book_id)?;
    call(s, &headers, move |svc, auth, card| svc.num_reservations(auth, card, &book))
        .await
        .map(Json)
}
