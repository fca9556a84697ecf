//! Stateless HTTP front end: `/v1/extract`, `/v1/apply`, `/v1/styles`,
//! `/v1/synthesize` and `/healthz`.
//!
//! Requests are either JSON, with images as base64 PNG strings, or
//! multipart, with images as file parts and everything else as JSON text.

mod payload;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::sync::Arc;
use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use maskforge::color::SimilarityChannels;
use maskforge::error::Error;
use maskforge::extract::{extract_eye_mask, ClusterParams, ExtractOptions, DEFAULT_ROI_MARGIN};
use maskforge::geometry::{CanonicalLayout, LandmarkSet};
use maskforge::image::{decode_rgb, decode_rgba, encode_rgb, encode_rgba};
use maskforge::parsing::{decode_parsing, ParsingLabels};
use maskforge::synth::{
    render_style_mask, sample_style_for, MakeupRegion, MakeupStyle, StyleLibrary,
};
use maskforge::video::{
    apply_to_frame, restrict_to_regions, ApplyOptions, FrameInput, RegionToggles,
};
use serde::Deserialize;
use serde_json::json;

use payload::Payload;
pub use payload::MAX_BODY_BYTES;

pub const STATS_HEADER: &str = "x-maskforge-stats";
pub const WARNING_HEADER: &str = "x-maskforge-warning";
pub const STYLE_HEADER: &str = "x-maskforge-style";
pub const MAX_ALPHA_SCALE: f64 = 2.0;

/// Immutable state shared by every request.
#[derive(Clone)]
pub struct AppState {
    pub lib: Arc<StyleLibrary>,
    pub canon: Arc<CanonicalLayout>,
    pub labels: Arc<ParsingLabels>,
}

impl AppState {
    pub fn new(lib: StyleLibrary, canon: CanonicalLayout, labels: ParsingLabels) -> Self {
        AppState {
            lib: Arc::new(lib),
            canon: Arc::new(canon),
            labels: Arc::new(labels),
        }
    }

    pub fn builtin() -> Self {
        let canon = CanonicalLayout::builtin();
        AppState::new(
            StyleLibrary::builtin(&canon),
            canon,
            ParsingLabels::default(),
        )
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/extract", post(extract))
        .route("/v1/apply", post(apply))
        .route("/v1/styles", get(styles))
        .route("/v1/synthesize", post(synthesize))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Error body: `{"error": <reason>, "message": <text>}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            reason,
            message: message.into(),
        }
    }

    pub fn bad_request(reason: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, reason, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, reason) = match &e {
            Error::MissingEyeRegion => (StatusCode::UNPROCESSABLE_ENTITY, "missing_eye_region"),
            Error::TooFewPixels { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "too_few_pixels"),
            Error::Decode { .. } | Error::Codec(_) | Error::InvalidImage(_) => {
                (StatusCode::BAD_REQUEST, "undecodable_input")
            }
            Error::InvalidLandmarks(_) => (StatusCode::BAD_REQUEST, "invalid_landmarks"),
            Error::InvalidParameter(_) => (StatusCode::BAD_REQUEST, "invalid_parameter"),
            Error::DimensionMismatch { .. } => (StatusCode::BAD_REQUEST, "dimension_mismatch"),
            Error::Json { .. } => (StatusCode::BAD_REQUEST, "invalid_json"),
            Error::UnknownTemplate(_) => (StatusCode::NOT_FOUND, "unknown_template"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, reason, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.reason, self.message);
        }
        (
            self.status,
            Json(json!({ "error": self.reason, "message": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn png(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))],
        bytes,
    )
        .into_response()
}

fn header_json(v: &serde_json::Value) -> HeaderValue {
    HeaderValue::from_str(&v.to_string()).expect("compact JSON is a valid header value")
}

fn wants_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("application/json"))
}

fn landmarks(p: &Payload) -> ApiResult<LandmarkSet> {
    let v = p.require_json("landmarks")?;
    let lm = LandmarkSet::from_json(&v.to_string())
        .map_err(|e| ApiError::bad_request("invalid_landmarks", e.to_string()))?;
    lm.validate()?;
    Ok(lm)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtractParams {
    k: usize,
    s: usize,
    seed: u64,
    roi_margin: f64,
    chroma_only: bool,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            k: 6,
            s: 2,
            seed: 0,
            roi_margin: DEFAULT_ROI_MARGIN,
            chroma_only: false,
        }
    }
}

async fn extract(State(st): State<AppState>, req: Request) -> ApiResult<Response> {
    let as_json = wants_json(req.headers());
    let p = Payload::from_request(req).await?;
    blocking(move || {
        let photo = decode_rgb(p.require_image("photo")?)?;
        let parsing = decode_parsing(p.require_image("parsing")?)?;
        let lm = landmarks(&p)?;
        let params: ExtractParams = p.parse_json("params")?.unwrap_or_default();
        let opts = ExtractOptions {
            params: ClusterParams {
                k: params.k,
                s: params.s,
                seed: params.seed,
                ..Default::default()
            },
            roi_margin: params.roi_margin,
            channels: if params.chroma_only {
                SimilarityChannels::ChromaOnly
            } else {
                SimilarityChannels::Full
            },
            ..Default::default()
        };
        let t = Instant::now();
        let ex = extract_eye_mask(&photo, &lm, &parsing, &st.labels, &st.canon, &opts)?;
        let elapsed_ms = t.elapsed().as_secs_f64() * 1e3;
        let stats = json!({
            "skin_tone_lab": ex.eyes.iter().map(|e| e.skin_tone_lab).collect::<Vec<_>>(),
            "cluster_counts": ex.eyes.iter().map(|e| e.cluster_counts.clone()).collect::<Vec<_>>(),
            "elapsed_ms": elapsed_ms,
        });
        let mask = encode_rgba(&ex.mask)?;
        if as_json {
            let mut body = stats;
            body["mask_png"] = base64::engine::general_purpose::STANDARD
                .encode(&mask)
                .into();
            return Ok(Json(body).into_response());
        }
        let mut resp = png(mask);
        resp.headers_mut().insert(STATS_HEADER, header_json(&stats));
        Ok(resp)
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ApplyParams {
    alpha_scale: f64,
    regions: RegionToggles,
    gate: bool,
}

impl Default for ApplyParams {
    fn default() -> Self {
        ApplyParams {
            alpha_scale: 1.0,
            regions: RegionToggles::default(),
            gate: true,
        }
    }
}

async fn apply(State(st): State<AppState>, req: Request) -> ApiResult<Response> {
    let p = Payload::from_request(req).await?;
    blocking(move || {
        let o: ApplyParams = p.parse_json("options")?.unwrap_or_default();
        if !(0.0..=MAX_ALPHA_SCALE).contains(&o.alpha_scale) {
            return Err(ApiError::bad_request(
                "invalid_parameter",
                format!(
                    "alpha_scale must lie in [0, {MAX_ALPHA_SCALE}], got {}",
                    o.alpha_scale
                ),
            ));
        }
        let mask =
            restrict_to_regions(decode_rgba(p.require_image("mask")?)?, &st.canon, o.regions);
        let frame = FrameInput {
            image: decode_rgb(p.require_image("frame")?)?,
            landmarks: landmarks(&p)?,
            parsing: match p.image("parsing") {
                Some(b) if o.gate => Some(decode_parsing(b)?),
                _ => None,
            },
            timestamp_ms: 0.0,
        };
        let opts = ApplyOptions {
            gate: st.labels.face_region(),
            alpha_scale: o.alpha_scale,
        };
        let out = apply_to_frame(&mask, &frame, &st.canon, &opts)?;
        let mut resp = png(encode_rgb(&out.image)?);
        if let Some(w) = out.warning {
            let v = HeaderValue::from_str(&w.replace(['\r', '\n'], " "))
                .unwrap_or(HeaderValue::from_static("passthrough"));
            resp.headers_mut().insert(WARNING_HEADER, v);
        }
        Ok(resp)
    })
    .await
}

async fn styles(State(st): State<AppState>) -> Json<serde_json::Value> {
    let lib = &st.lib;
    let templates: Vec<_> = lib
        .infos()
        .into_iter()
        .map(|t| json!({ "id": t.id, "region": t.region }))
        .collect();
    Json(json!({
        "count": templates.len(),
        "templates": templates,
        "palettes": lib.palettes,
        "finishes": lib.finishes,
        "opacity_range": lib.opacity_range,
        "width": lib.width,
        "height": lib.height,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthesizeRequest {
    seed: u64,
    regions: Vec<MakeupRegion>,
    style: Option<MakeupStyle>,
}

async fn synthesize(State(st): State<AppState>, body: axum::body::Bytes) -> ApiResult<Response> {
    let req: SynthesizeRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SynthesizeRequest::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?
    };
    blocking(move || {
        let style = match req.style {
            Some(s) => s,
            None => {
                let regions = if req.regions.is_empty() {
                    MakeupRegion::ALL.to_vec()
                } else {
                    req.regions
                };
                sample_style_for(&st.lib, req.seed, &regions)?
            }
        };
        let mask = render_style_mask(&style, &st.lib, &st.canon)?;
        let mut resp = png(encode_rgba(&mask)?);
        resp.headers_mut().insert(
            STYLE_HEADER,
            header_json(&serde_json::to_value(&style).expect("style serializes")),
        );
        Ok(resp)
    })
    .await
}
