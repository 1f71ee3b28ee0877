use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ljp_core::app::{handle_predict, ApiError, ErrorCode, ModelArtifact, ModelInfo, PredictRequest, Registry};
use ljp_core::eval::TOOLKIT_VERSION;
use serde::Serialize;

use crate::args::ServeArgs;
use crate::error::{CliError, CliResult};

/// Request bodies above this size are rejected.
pub const MAX_BODY_BYTES: usize = 1 << 20;

pub fn load_registry(paths: &[PathBuf], embeddings: Option<&Path>) -> CliResult<Registry> {
    let mut registry = Registry::new();
    for path in paths {
        let artifact =
            ModelArtifact::load(path, embeddings).map_err(|e| CliError::data(e).context(format!("loading {}", path.display())))?;
        log::info!("loaded {} ({} {}) from {}", artifact.id, artifact.case_type, artifact.task(), path.display());
        registry.insert(artifact)?;
    }
    Ok(registry)
}

pub fn status_of(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::InvalidInput => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::TaskMismatch => StatusCode::CONFLICT,
        ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
        ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

struct ErrorResponse(StatusCode, ApiError);

impl From<ApiError> for ErrorResponse {
    fn from(e: ApiError) -> Self {
        ErrorResponse(status_of(e.code), e)
    }
}

impl IntoResponse for ErrorResponse {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
    models: usize,
}

async fn health(State(registry): State<Arc<Registry>>) -> Json<Health> {
    Json(Health { status: "ok", version: TOOLKIT_VERSION, models: registry.len() })
}

async fn models(State(registry): State<Arc<Registry>>) -> Json<Vec<ModelInfo>> {
    Json(registry.list())
}

async fn predict(State(registry): State<Arc<Registry>>, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(rejection) => {
            let status = rejection.status();
            return ErrorResponse(status, ApiError::new(ErrorCode::BadRequest, rejection.body_text())).into_response();
        }
    };
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return ErrorResponse::from(ApiError::new(ErrorCode::BadRequest, format!("malformed request body: {e}")))
                .into_response()
        }
    };
    let joined = tokio::task::spawn_blocking(move || handle_predict(&registry, &req)).await;
    match joined {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => ErrorResponse::from(e).into_response(),
        Err(e) => {
            log::error!("prediction task failed: {e}");
            ErrorResponse::from(ApiError::new(ErrorCode::Internal, "prediction failed")).into_response()
        }
    }
}

async fn no_route() -> ErrorResponse {
    ApiError::new(ErrorCode::NotFound, "no such endpoint (try /health, /models, /predict)").into()
}

async fn wrong_method() -> ErrorResponse {
    ErrorResponse(StatusCode::METHOD_NOT_ALLOWED, ApiError::new(ErrorCode::BadRequest, "method not allowed for this endpoint"))
}

/// Lets a browser client on another origin call the service.
async fn cors(req: Request, next: Next) -> Response {
    let mut response = if req.method() == Method::OPTIONS { StatusCode::NO_CONTENT.into_response() } else { next.run(req).await };
    let h = response.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    response
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/predict", post(predict))
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(middleware::from_fn(cors))
        .with_state(registry)
}

pub async fn serve(listener: tokio::net::TcpListener, registry: Arc<Registry>) -> std::io::Result<()> {
    axum::serve(listener, router(registry))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub fn serve_blocking(a: &ServeArgs) -> CliResult<()> {
    let registry = Arc::new(load_registry(&a.artifacts, a.embeddings.as_deref())?);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::internal)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| CliError::data(e).context(format!("cannot bind {}", a.addr)))?;
        let local: SocketAddr = listener.local_addr().map_err(CliError::internal)?;
        eprintln!("listening on http://{local} with {} model(s)", registry.len());
        serve(listener, registry).await.map_err(CliError::internal)
    })
}
