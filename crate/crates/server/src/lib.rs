//! HTTP query service over an immutable corpus index snapshot.
//!
//! Routes:
//! - `GET /api/images` ids, labels and sizes (optional `?label=` filter)
//! - `GET /api/canvas/{id}` canvas JSON
//! - `POST /api/query` `QueryRequest` JSON in, `RankedResults` JSON out
//! - `GET /api/overlay/{id}.svg?elements=poselines,cones,regions,lines`
//!   (with `target=<id>` it renders the side-by-side match view instead)
//! - `GET /api/params` index extraction parameters and query defaults

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use posecomp_core::index::QueryRequest;
use posecomp_core::normalize::NormMode;
use posecomp_core::overlay::{render_match, render_overlay_with_scene, OverlayOptions};
use posecomp_core::similarity::{CombineMode, SimilarityParams};
use posecomp_core::{
    compare_canvases, CorpusIndex, Error, Exec, QueryParams, RankedResults, SortMethod,
};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, RwLock};

/// Shared service state. Queries clone the current snapshot; `replace`
/// swaps in a new index atomically.
#[derive(Clone)]
pub struct AppState {
    index: Arc<RwLock<Arc<CorpusIndex>>>,
    /// Artwork href template; `{id}` is replaced by the image id.
    media_template: Option<Arc<str>>,
    exec: Exec,
}

impl AppState {
    pub fn new(index: CorpusIndex) -> Self {
        Self {
            index: Arc::new(RwLock::new(Arc::new(index))),
            media_template: None,
            exec: Exec::default(),
        }
    }

    pub fn with_media_template(mut self, template: impl Into<String>) -> Self {
        self.media_template = Some(template.into().into());
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn snapshot(&self) -> Arc<CorpusIndex> {
        self.index.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, index: CorpusIndex) {
        *self.index.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(index);
    }
}

/// JSON error body: `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Parameter(_) | Error::Mismatch(_) => {
                (StatusCode::BAD_REQUEST, "invalid_parameter")
            }
            Error::Parse { .. } | Error::Schema { .. } | Error::Json(_) => {
                (StatusCode::BAD_REQUEST, "invalid_input")
            }
            Error::MissingFeatures(_) | Error::DimensionMismatch { .. } => {
                (StatusCode::BAD_REQUEST, "features")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/images", get(images))
        .route("/api/canvas/{id}", get(canvas))
        .route("/api/query", post(query))
        .route("/api/overlay/{file}", get(overlay))
        .route("/api/params", get(params))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub image_id: String,
    pub class_label: Option<String>,
    pub width: u32,
    pub height: u32,
    pub poses: usize,
    pub poselines: usize,
}

#[derive(Deserialize)]
struct ImagesFilter {
    label: Option<String>,
}

async fn images(
    State(st): State<AppState>,
    Query(f): Query<ImagesFilter>,
) -> Json<Vec<ImageSummary>> {
    let index = st.snapshot();
    let list = index
        .entries
        .values()
        .filter(|e| f.label.is_none() || e.scene.class_label == f.label)
        .map(|e| ImageSummary {
            image_id: e.scene.image_id.clone(),
            class_label: e.scene.class_label.clone(),
            width: e.scene.width,
            height: e.scene.height,
            poses: e.scene.poses.len(),
            poselines: e.canvas.poselines.len(),
        })
        .collect();
    Json(list)
}

async fn canvas(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let index = st.snapshot();
    let entry = index.get(&id)?;
    Ok(Json(&entry.canvas).into_response())
}

async fn query(
    State(st): State<AppState>,
    body: axum::body::Bytes,
) -> ApiResult<Json<RankedResults>> {
    let req: QueryRequest = serde_json::from_slice(&body).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        kind: "invalid_request",
        message: e.to_string(),
    })?;
    if req.k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()).into());
    }
    let index = st.snapshot();
    let exec = st.exec;
    let res = tokio::task::spawn_blocking(move || index.query(&req, exec))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: e.to_string(),
        })??;
    Ok(Json(res))
}

#[derive(Deserialize, Default)]
struct OverlayQuery {
    elements: Option<String>,
    target: Option<String>,
    norm: Option<NormMode>,
    beta: Option<f64>,
}

async fn overlay(
    State(st): State<AppState>,
    Path(file): Path<String>,
    Query(q): Query<OverlayQuery>,
) -> ApiResult<Response> {
    let id = file.strip_suffix(".svg").unwrap_or(&file);
    let index = st.snapshot();
    let entry = index.get(id)?;
    let svg = match &q.target {
        Some(target) => {
            let t = index.get(target)?;
            let norm = q.norm.unwrap_or(NormMode::ActionRegion);
            let params = SimilarityParams {
                beta: q.beta,
                ..SimilarityParams::default()
            };
            params.validate()?;
            let record =
                compare_canvases(entry.normalized.get(norm), t.normalized.get(norm), &params)?;
            render_match(&entry.canvas, &t.canvas, &record)?
        }
        None => {
            let mut opts = match &q.elements {
                Some(list) => OverlayOptions::from_element_list(list)?,
                None => OverlayOptions::default(),
            };
            opts.image_href = st.media_template.as_deref().map(|t| t.replace("{id}", id));
            render_overlay_with_scene(&entry.canvas, Some(&entry.scene), &opts)?
        }
    };
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsInfo {
    pub extract: posecomp_core::ExtractParams,
    pub params_fingerprint: String,
    pub query: QueryParams,
    pub default_k: usize,
    pub norm_modes: Vec<String>,
    pub sort_methods: Vec<String>,
    pub combine_modes: Vec<String>,
    pub features_attached: bool,
}

async fn params(State(st): State<AppState>) -> Json<ParamsInfo> {
    let index = st.snapshot();
    Json(ParamsInfo {
        extract: index.params,
        params_fingerprint: index.params_fingerprint.clone(),
        query: QueryParams::default(),
        default_k: 10,
        norm_modes: NormMode::ALL
            .iter()
            .map(|m| m.as_str().to_owned())
            .collect(),
        sort_methods: SortMethod::ALL
            .iter()
            .map(|m| m.as_str().to_owned())
            .collect(),
        combine_modes: CombineMode::ALL
            .iter()
            .map(|m| m.as_str().to_owned())
            .collect(),
        features_attached: index.feature_metric.is_some(),
    })
}
