//! JSON-over-HTTP API.
//!
//! | method | path          | body                                    |
//! |--------|---------------|-----------------------------------------|
//! | POST   | `/api/expand` | `{query, source_filter?, limit?}`       |
//! | POST   | `/api/choose` | `{query, term}`                         |
//! | GET    | `/api/pool`   |                                         |
//! | GET    | `/api/health` |                                         |
//!
//! Errors come back as `{"error": message, "causes": [..]}`.

use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::service::{ChooseRequest, ExpandRequest, Service, ServiceError};

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    causes: Vec<String>,
}

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = ErrorBody {
            error: self.0.to_string(),
            causes: self.0.causes(),
        };
        (status, Json(body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::BadRequest(e.to_string())))
}

/// Runs blocking service work off the async executor.
async fn blocking<T, F>(service: Arc<Service>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(ServiceError::Internal(anyhow::anyhow!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn expand(State(service): State<Arc<Service>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: ExpandRequest = parse(&body)?;
    Ok(Json(blocking(service, move |s| s.expand(&req)).await?))
}

async fn choose(State(service): State<Arc<Service>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: ChooseRequest = parse(&body)?;
    Ok(Json(blocking(service, move |s| s.choose(&req)).await?))
}

async fn pool(State(service): State<Arc<Service>>) -> impl IntoResponse {
    Json(service.store().snapshot())
}

async fn health(State(service): State<Arc<Service>>) -> impl IntoResponse {
    Json(service.health())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/expand", post(expand))
        .route("/api/choose", post(choose))
        .route("/api/pool", get(pool))
        .route("/api/health", get(health))
        .with_state(service)
}

/// Serves on an already bound listener until the process is interrupted.
pub async fn serve_listener(service: Arc<Service>, listener: tokio::net::TcpListener) -> Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("http server")
}

/// Binds `listen` and serves. Builds its own runtime, so call it from plain
/// synchronous code after [`Service::build`].
pub fn serve(service: Arc<Service>, listen: &str) -> Result<()> {
    let addr: SocketAddr = listen.parse().with_context(|| format!("invalid listen address {listen:?}"))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("listening on http://{}", listener.local_addr()?);
        serve_listener(service, listener).await
    })
}
