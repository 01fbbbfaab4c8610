//! Local HTTP preview service.
//!
//! Uploaded images are kept in memory under their content hash, and their
//! importance maps go through a shared [`ImportanceCache`], so dragging a
//! target size around only pays for the warp, crop and render.
//!
//! | route | response |
//! |---|---|
//! | `POST /images` | `{id, width, height}` for the uploaded raster |
//! | `GET /images/{id}/importance` | grayscale PNG |
//! | `GET /images/{id}/retarget?width=&height=&dt=&omega0=` | PNG, plan JSON in the `x-retarget-plan` header |
//! | `GET /images/{id}/curve?samples=&factor=` | `[{factor, d}, ...]` |
//! | `GET /healthz` | `ok` |

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use image::{DynamicImage, ImageFormat, RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};
use warpcrop::{
    distortion_curve, retarget_cached, source_hash, CachedImportance, CurvePoint, ImportanceCache, RetargetConfig,
    RetargetPlan, StageTimings,
};

/// Header carrying the plan of a retarget response.
pub const PLAN_HEADER: &str = "x-retarget-plan";

const MAX_UPLOAD_BYTES: usize = 64 << 20;
const MAX_CURVE_SAMPLES: usize = 201;

#[derive(Clone)]
enum Stored {
    Rgb(Arc<RgbImage>),
    Rgba(Arc<RgbaImage>),
}

impl Stored {
    fn dimensions(&self) -> (u32, u32) {
        match self {
            Stored::Rgb(img) => img.dimensions(),
            Stored::Rgba(img) => img.dimensions(),
        }
    }

    fn hash(&self) -> String {
        match self {
            Stored::Rgb(img) => source_hash(img.as_ref()),
            Stored::Rgba(img) => source_hash(img.as_ref()),
        }
    }
}

/// Shared state: the image store, the importance cache and the base config
/// that query parameters are applied on top of.
pub struct AppState {
    images: RwLock<HashMap<String, Stored>>,
    cache: ImportanceCache<f64>,
    base: RetargetConfig,
}

impl AppState {
    pub fn new(cache: ImportanceCache<f64>, base: RetargetConfig) -> Self {
        Self {
            images: RwLock::new(HashMap::new()),
            cache,
            base,
        }
    }

    pub fn in_memory() -> Self {
        Self::new(ImportanceCache::in_memory(), RetargetConfig::default())
    }

    pub fn cache(&self) -> &ImportanceCache<f64> {
        &self.cache
    }

    fn image(&self, id: &str) -> Result<Stored, ApiError> {
        self.images
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no image with id {id}")))
    }

    fn importance(&self, id: &str, image: &Stored) -> warpcrop::Result<Arc<CachedImportance<f64>>> {
        match image {
            Stored::Rgb(img) => self.cache.get_or_compute(img.as_ref(), id, &self.base),
            Stored::Rgba(img) => self.cache.get_or_compute(img.as_ref(), id, &self.base),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

impl From<warpcrop::Error> for ApiError {
    fn from(e: warpcrop::Error) -> Self {
        let status = if e.is_input_error() {
            StatusCode::BAD_REQUEST
        } else if e.is_budget_error() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn png_response(img: DynamicImage) -> ApiResult<Response> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))], bytes).into_response())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Uploaded {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

async fn upload(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Uploaded>)> {
    let state2 = Arc::clone(&state);
    blocking(move || {
        let decoded = image::load_from_memory(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("cannot decode image: {e}")))?;
        let stored = if decoded.color().has_alpha() {
            Stored::Rgba(Arc::new(decoded.to_rgba8()))
        } else {
            Stored::Rgb(Arc::new(decoded.to_rgb8()))
        };
        let id = stored.hash();
        let (width, height) = stored.dimensions();
        state2.images.write().unwrap().entry(id.clone()).or_insert(stored.clone());

        // Warm the cache in the background; later requests join the same computation.
        let warm_id = id.clone();
        std::thread::spawn(move || {
            if let Err(e) = state2.importance(&warm_id, &stored) {
                log::warn!("importance for {warm_id} failed: {e}");
            }
        });
        Ok((StatusCode::CREATED, Json(Uploaded { id, width, height })))
    })
    .await
}

async fn importance(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let image = state.image(&id)?;
    let entry = blocking(move || Ok(state.importance(&id, &image)?)).await?;
    png_response(DynamicImage::ImageLuma8(entry.map.to_gray()))
}

#[derive(Debug, Default, Deserialize)]
pub struct RetargetQuery {
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub dt: Option<f64>,
    pub omega0: Option<f64>,
}

/// Contents of the [`PLAN_HEADER`] header.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanHeader {
    pub plan: RetargetPlan,
    pub timings: StageTimings,
}

fn with_overrides(base: &RetargetConfig, dt: Option<f64>, omega0: Option<f64>) -> RetargetConfig {
    let mut config = base.clone();
    if let Some(dt) = dt {
        config.d_threshold = dt;
    }
    if let Some(omega0) = omega0 {
        config.omega0 = omega0;
    }
    config
}

async fn retarget(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RetargetQuery>,
) -> ApiResult<Response> {
    let image = state.image(&id)?;
    let mut config = with_overrides(&state.base, q.dt, q.omega0);
    config.factor = None;
    config.target_width = q.width;
    config.target_height = q.height;

    let (png, header) = blocking(move || {
        let (img, plan, timings) = match &image {
            Stored::Rgb(src) => {
                let out = retarget_cached(src.as_ref(), &id, &config, &state.cache)?;
                (DynamicImage::ImageRgb8(out.image), out.plan, out.timings)
            }
            Stored::Rgba(src) => {
                let out = retarget_cached(src.as_ref(), &id, &config, &state.cache)?;
                (DynamicImage::ImageRgba8(out.image), out.plan, out.timings)
            }
        };
        let header = serde_json::to_string(&PlanHeader { plan, timings }).map_err(ApiError::internal)?;
        Ok((png_response(img)?, header))
    })
    .await?;

    let mut response = png;
    let value = HeaderValue::from_str(&header).map_err(ApiError::internal)?;
    response.headers_mut().insert(PLAN_HEADER, value);
    Ok(response)
}

#[derive(Debug, Deserialize)]
pub struct CurveQuery {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Last factor of the curve.
    #[serde(default = "default_curve_end")]
    pub factor: f64,
    pub omega0: Option<f64>,
}

fn default_samples() -> usize {
    11
}

fn default_curve_end() -> f64 {
    0.5
}

async fn curve(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<CurveQuery>,
) -> ApiResult<Json<Vec<CurvePoint>>> {
    if q.samples > MAX_CURVE_SAMPLES {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("at most {MAX_CURVE_SAMPLES} samples"),
        ));
    }
    let image = state.image(&id)?;
    let mut config = with_overrides(&state.base, None, q.omega0);
    config.target_width = None;
    config.target_height = None;
    config.factor = Some(q.factor);
    let points = blocking(move || {
        let entry = state.importance(&id, &image)?;
        Ok(distortion_curve(&entry.map, &config, q.samples)?)
    })
    .await?;
    Ok(Json(points))
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/images", post(upload))
        .route("/images/{id}/importance", get(importance))
        .route("/images/{id}/retarget", get(retarget))
        .route("/images/{id}/curve", get(curve))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}
