//! HTTP inference endpoint: `GET /health` and `POST /predict?plant=<name>`
//! with a raw jpeg/png body.
//!
//! The model registry is loaded once at startup and shared read-only; a
//! semaphore caps concurrent pipeline work so memory stays bounded.

use anyhow::Context;
use axum::body::Body;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use leafdx::dataset::{decode_image, DatasetError};
use leafdx::features::FeatureVector;
use leafdx::forest::{load_model, ForestModel};
use leafdx::pipeline::{predict_raster, prediction_summary, PipelineError, PredictionSummary};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

/// Raw body cap: covers every PlantVillage image with wide margin.
pub const MAX_BODY_BYTES: usize = 10 * 1024 * 1024;
/// Concurrent in-flight prediction cap.
const MAX_INFLIGHT: usize = 32;

pub struct AppState {
    registry: BTreeMap<String, ForestModel>,
    limiter: tokio::sync::Semaphore,
}

/// Load every `*.json` model under `dir`, keyed by plant name. Refuses to
/// produce an empty registry.
pub fn load_registry(dir: &Path) -> anyhow::Result<BTreeMap<String, ForestModel>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading models directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut registry = BTreeMap::new();
    for path in paths {
        let model = load_model(&path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(old) = registry.insert(model.plant.clone(), model) {
            anyhow::bail!("two model files claim plant {:?}", old.plant);
        }
    }
    anyhow::ensure!(
        !registry.is_empty(),
        "no model files (*.json) in {} — refusing to start",
        dir.display()
    );
    Ok(registry)
}

pub fn app(registry: BTreeMap<String, ForestModel>) -> Router {
    let state = Arc::new(AppState { registry, limiter: tokio::sync::Semaphore::new(MAX_INFLIGHT) });
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        // The body cap is enforced by hand in `predict` so oversize uploads
        // get the JSON error body.
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

pub async fn run(models_dir: &Path, port: u16) -> anyhow::Result<()> {
    let registry = load_registry(models_dir)?;
    log::info!("serving {} models: {:?}", registry.len(), registry.keys().collect::<Vec<_>>());
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port)))
        .await
        .with_context(|| format!("binding port {port}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(registry)).await?;
    Ok(())
}

#[derive(Serialize)]
struct HealthBody {
    status: &'static str,
    models: Vec<String>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthBody> {
    Json(HealthBody { status: "ok", models: state.registry.keys().cloned().collect() })
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    detail: String,
}

fn error_response(status: StatusCode, code: &'static str, detail: String) -> Response {
    (status, Json(ErrorBody { error: code, detail })).into_response()
}

#[derive(Serialize)]
pub struct PredictionResponse {
    #[serde(flatten)]
    pub summary: PredictionSummary,
    pub feature_vector: FeatureVector,
}

async fn predict(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Body,
) -> Response {
    let Some(plant) = params.get("plant").cloned() else {
        return error_response(
            StatusCode::NOT_FOUND,
            "unknown_plant",
            "missing ?plant=<name> query parameter".into(),
        );
    };
    if !state.registry.contains_key(&plant) {
        return error_response(
            StatusCode::NOT_FOUND,
            "unknown_plant",
            format!("no model for plant {plant:?}"),
        );
    }

    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    if content_type != "image/jpeg" && content_type != "image/png" {
        return error_response(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_content_type",
            format!("expected image/jpeg or image/png, got {content_type:?}"),
        );
    }

    let bytes = match axum::body::to_bytes(body, MAX_BODY_BYTES).await {
        Ok(b) => b,
        Err(_) => {
            return error_response(
                StatusCode::PAYLOAD_TOO_LARGE,
                "payload_too_large",
                format!("request body exceeds {MAX_BODY_BYTES} bytes"),
            );
        }
    };

    let _permit = state.limiter.acquire().await.expect("semaphore never closed");
    let state2 = Arc::clone(&state);
    let worked = tokio::task::spawn_blocking(move || {
        let model = state2.registry.get(&plant).expect("checked above");
        let img = decode_image(&bytes)?;
        let (prediction, features) = predict_raster(model, &img)?;
        Ok::<_, PipelineError>(PredictionResponse {
            summary: prediction_summary(model, &prediction),
            feature_vector: features,
        })
    })
    .await
    .expect("prediction task never panics");

    match worked {
        Ok(response) => (StatusCode::OK, Json(response)).into_response(),
        Err(PipelineError::Dataset(DatasetError::DecodeError { reason, .. })) => error_response(
            StatusCode::BAD_REQUEST,
            "decode_error",
            format!("cannot decode image body: {reason}"),
        ),
        Err(PipelineError::Feature(e)) => error_response(
            StatusCode::BAD_REQUEST,
            "empty_foreground",
            format!("segmentation found no leaf: {e}"),
        ),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}
