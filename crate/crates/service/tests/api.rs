use std::sync::LazyLock;

use axum::body::Body;
use axum::http::{header, HeaderMap, Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use maskforge::color::composite_mask;
use maskforge::geometry::LandmarkSet;
use maskforge::image::{decode_rgb, decode_rgba, encode_rgb, encode_rgba, Image, ImageRgb};
use maskforge::parsing::{encode_parsing, ParsingLabels};
use maskforge::synth::{
    generate_pair, render_style_mask, sample_style_for, MakeupRegion, StyleLibrary,
};
use maskforge::synthetic::{synthetic_face, SyntheticFace, SyntheticFaceParams};
use maskforge_service::{router, AppState, MAX_BODY_BYTES, STATS_HEADER, WARNING_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

static STATE: LazyLock<AppState> = LazyLock::new(AppState::builtin);

fn app() -> Router {
    router(STATE.clone())
}

struct Reply {
    status: StatusCode,
    headers: HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn send(req: Request<Body>) -> Reply {
    let resp = app().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

async fn post_json(path: &str, v: &Value) -> Reply {
    let req = Request::post(path)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(v.to_string()))
        .unwrap();
    send(req).await
}

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn lm_json(lm: &LandmarkSet) -> Value {
    serde_json::from_str(&lm.to_json()).unwrap()
}

fn face(seed: u64) -> SyntheticFace {
    synthetic_face(
        &SyntheticFaceParams::default(),
        seed,
        &ParsingLabels::default(),
    )
    .unwrap()
}

/// A face wearing a sampled eyeshadow shape in violet.
fn made_up(seed: u64) -> (SyntheticFace, ImageRgb) {
    let f = face(seed);
    let lib = &STATE.lib;
    let mut style = sample_style_for(lib, seed, &[MakeupRegion::Eyeshadow]).unwrap();
    style.regions[0].color = [0.35, 0.2, 0.55];
    style.regions[0].opacity = style.regions[0].opacity.max(0.5);
    let mask = render_style_mask(&style, lib, &STATE.canon).unwrap();
    let after = generate_pair(&f.image, &f.landmarks, &mask, &STATE.canon)
        .unwrap()
        .after;
    (f, after)
}

fn extract_request(f: &SyntheticFace, photo: &ImageRgb, params: Value) -> Value {
    json!({
        "photo": b64(&encode_rgb(photo).unwrap()),
        "parsing": b64(&encode_parsing(&f.parsing).unwrap()),
        "landmarks": lm_json(&f.landmarks),
        "params": params,
    })
}

fn style_mask_png(seed: u64) -> Vec<u8> {
    let lib: &StyleLibrary = &STATE.lib;
    let style = sample_style_for(lib, seed, &MakeupRegion::ALL).unwrap();
    encode_rgba(&render_style_mask(&style, lib, &STATE.canon).unwrap()).unwrap()
}

fn apply_request(mask: &[u8], f: &SyntheticFace, options: Value) -> Value {
    json!({
        "mask": b64(mask),
        "frame": b64(&encode_rgb(&f.image).unwrap()),
        "landmarks": lm_json(&f.landmarks),
        "parsing": b64(&encode_parsing(&f.parsing).unwrap()),
        "options": options,
    })
}

#[tokio::test]
async fn health_and_styles() {
    let r = send(Request::get("/healthz").body(Body::empty()).unwrap()).await;
    assert_eq!(
        (r.status, r.body.as_slice()),
        (StatusCode::OK, b"ok".as_slice())
    );
    let r = send(Request::get("/v1/styles").body(Body::empty()).unwrap()).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["count"], STATE.lib.templates.len());
    assert_eq!(
        v["templates"].as_array().unwrap().len(),
        STATE.lib.templates.len()
    );
    assert!(v["palettes"]["eyeshadow"]
        .as_array()
        .is_some_and(|p| !p.is_empty()));
}

#[tokio::test]
async fn extract_returns_a_deterministic_rgba_mask() {
    let (f, photo) = made_up(3);
    let body = extract_request(&f, &photo, json!({ "seed": 11 }));
    let a = post_json("/v1/extract", &body).await;
    assert_eq!(
        a.status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&a.body)
    );
    assert_eq!(a.headers[header::CONTENT_TYPE], "image/png");
    let mask = decode_rgba(&a.body).unwrap();
    assert_eq!((mask.width(), mask.height()), STATE.canon.dims());
    assert!(mask.pixels().iter().any(|p| p[3] > 0.0));
    let stats: Value = serde_json::from_str(a.headers[STATS_HEADER].to_str().unwrap()).unwrap();
    assert_eq!(stats["skin_tone_lab"].as_array().unwrap().len(), 2);
    assert_eq!(stats["cluster_counts"][0].as_array().unwrap().len(), 6);
    assert!(stats["elapsed_ms"].as_f64().unwrap() > 0.0);

    let b = post_json("/v1/extract", &body).await;
    assert_eq!(a.body, b.body);

    let req = Request::post("/v1/extract")
        .header(header::ACCEPT, "application/json")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let j = send(req).await.json();
    assert_eq!(j["mask_png"], b64(&a.body));
    assert_eq!(j["cluster_counts"], stats["cluster_counts"]);
}

fn multipart(parts: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "maskforge-test-boundary";
    let mut body = Vec::new();
    for (name, data) in parts {
        body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n").as_bytes());
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

#[tokio::test]
async fn multipart_and_base64_agree() {
    let (f, photo) = made_up(4);
    let json_reply = post_json("/v1/extract", &extract_request(&f, &photo, json!({}))).await;
    let photo_png = encode_rgb(&photo).unwrap();
    let parsing_png = encode_parsing(&f.parsing).unwrap();
    let lm = f.landmarks.to_json();
    let (ct, body) = multipart(&[
        ("photo", &photo_png),
        ("parsing", &parsing_png),
        ("landmarks", lm.as_bytes()),
    ]);
    let req = Request::post("/v1/extract")
        .header(header::CONTENT_TYPE, ct)
        .body(Body::from(body))
        .unwrap();
    let mp = send(req).await;
    assert_eq!(
        mp.status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&mp.body)
    );
    assert_eq!(mp.body, json_reply.body);
}

#[tokio::test]
async fn extract_errors_are_machine_readable() {
    let (f, photo) = made_up(5);
    let mut no_eyes = f.clone();
    no_eyes.parsing = Image::filled(f.parsing.width(), f.parsing.height(), 0);
    let r = post_json("/v1/extract", &extract_request(&no_eyes, &photo, json!({}))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"], "missing_eye_region");

    let mut garbage = extract_request(&f, &photo, json!({}));
    garbage["photo"] = b64(b"definitely not a png").into();
    let r = post_json("/v1/extract", &garbage).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "undecodable_input");

    let r = post_json(
        "/v1/extract",
        &extract_request(&f, &photo, json!({ "k": 0 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "invalid_parameter");

    let r = send(Request::post("/v1/extract").body(Body::from("{")).unwrap()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversize_bodies_are_rejected() {
    let big = vec![b' '; MAX_BODY_BYTES + 1];
    for path in ["/v1/extract", "/v1/apply"] {
        let r = send(Request::post(path).body(Body::from(big.clone())).unwrap()).await;
        assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE, "{path}");
        assert_eq!(r.json()["error"], "payload_too_large");
    }
}

#[tokio::test]
async fn zero_alpha_scale_returns_the_frame() {
    let f = face(7);
    let mask = style_mask_png(2);
    let r = post_json(
        "/v1/apply",
        &apply_request(&mask, &f, json!({ "alpha_scale": 0.0 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, encode_rgb(&f.image).unwrap());

    let full = post_json("/v1/apply", &apply_request(&mask, &f, json!({}))).await;
    let again = post_json("/v1/apply", &apply_request(&mask, &f, json!({}))).await;
    assert_eq!(full.body, again.body);
    assert_ne!(full.body, r.body);

    let r = post_json(
        "/v1/apply",
        &apply_request(&mask, &f, json!({ "alpha_scale": 2.5 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "invalid_parameter");
}

#[tokio::test]
async fn turning_off_lips_only_changes_the_mouth() {
    let f = face(8);
    let mask = style_mask_png(5);
    let all = decode_rgb(
        &post_json("/v1/apply", &apply_request(&mask, &f, json!({})))
            .await
            .body,
    )
    .unwrap();
    let opts = json!({ "regions": { "eyes": true, "lips": false, "cheeks": true } });
    let no_lips = decode_rgb(
        &post_json("/v1/apply", &apply_request(&mask, &f, opts))
            .await
            .body,
    )
    .unwrap();
    let lm = &f.landmarks.points;
    let mouth_top = lm[48..68]
        .iter()
        .map(|p| p[1])
        .fold(f64::INFINITY, f64::min);
    let mut changed = 0;
    for y in 0..all.height() {
        for x in 0..all.width() {
            if all.get(x, y) != no_lips.get(x, y) {
                changed += 1;
                assert!(
                    y as f64 > mouth_top - 20.0,
                    "change at ({x}, {y}) above the mouth"
                );
            }
        }
    }
    assert!(changed > 0);
}

#[tokio::test]
async fn degenerate_landmarks_pass_through_with_a_warning() {
    let mut f = face(9);
    let p0 = f.landmarks.points[0];
    f.landmarks.points.iter_mut().for_each(|p| *p = p0);
    let r = post_json(
        "/v1/apply",
        &apply_request(&style_mask_png(1), &f, json!({})),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.headers.contains_key(WARNING_HEADER));
    assert_eq!(r.body, encode_rgb(&f.image).unwrap());
}

#[tokio::test]
async fn apply_matches_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = face(10);
    let mask = style_mask_png(6);
    let paths =
        ["mask.png", "frame.png", "lm.json", "parsing.png", "out.png"].map(|n| dir.path().join(n));
    std::fs::write(&paths[0], &mask).unwrap();
    std::fs::write(&paths[1], encode_rgb(&f.image).unwrap()).unwrap();
    std::fs::write(&paths[2], f.landmarks.to_json()).unwrap();
    std::fs::write(&paths[3], encode_parsing(&f.parsing).unwrap()).unwrap();
    let s = paths.each_ref().map(|p| p.to_str().unwrap().to_owned());
    let code = maskforge_cli::run([
        "maskforge",
        "apply",
        "--mask",
        &s[0],
        "--frame",
        &s[1],
        "--landmarks",
        &s[2],
        "--parsing",
        &s[3],
        "--out",
        &s[4],
    ]);
    assert_eq!(code, 0);
    let r = post_json(
        "/v1/apply",
        &apply_request(&mask, &f, json!({ "alpha_scale": 1.0 })),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, std::fs::read(&paths[4]).unwrap());
}

#[tokio::test]
async fn synthesize_is_deterministic_and_checks_templates() {
    let a = post_json("/v1/synthesize", &json!({ "seed": 7 })).await;
    let b = post_json("/v1/synthesize", &json!({ "seed": 7 })).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.headers[header::CONTENT_TYPE], "image/png");
    assert_eq!(a.body, b.body);
    let m = decode_rgba(&a.body).unwrap();
    assert_eq!((m.width(), m.height()), STATE.canon.dims());
    assert_ne!(
        post_json("/v1/synthesize", &json!({ "seed": 8 }))
            .await
            .body,
        a.body
    );

    let mut style = sample_style_for(&STATE.lib, 7, &[MakeupRegion::Lipstick]).unwrap();
    let chosen = post_json("/v1/synthesize", &json!({ "style": style })).await;
    assert_eq!(chosen.status, StatusCode::OK);
    style.regions[0].template = "no_such_template".into();
    let r = post_json("/v1/synthesize", &json!({ "style": style })).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], "unknown_template");
}

#[tokio::test]
async fn synthesized_mask_on_a_canonical_face_is_a_plain_composite() {
    let canon = &STATE.canon;
    let (w, h) = canon.dims();
    let frame: ImageRgb = Image::from_fn(w, h, |x, y| {
        [
            0.78,
            0.6 + 0.05 * (x as f64 / w as f64),
            0.5 + 0.05 * (y as f64 / h as f64),
        ]
    });
    let mask_png = post_json("/v1/synthesize", &json!({ "seed": 7 }))
        .await
        .body;
    let req = json!({
        "mask": b64(&mask_png),
        "frame": b64(&encode_rgb(&frame).unwrap()),
        "landmarks": lm_json(&canon.reference),
    });
    let r = post_json("/v1/apply", &req).await;
    assert_eq!(r.status, StatusCode::OK);
    let got = decode_rgb(&r.body).unwrap();
    let want = composite_mask(&decode_rgba(&mask_png).unwrap(), &frame).unwrap();
    let worst = got
        .pixels()
        .iter()
        .zip(want.pixels())
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 / 255.0 + 1e-9, "{}", worst * 255.0);
}

#[tokio::test]
async fn responses_do_not_depend_on_request_order() {
    let (f, photo) = made_up(12);
    let mask = style_mask_png(3);
    let reqs = [
        (
            "/v1/extract",
            extract_request(&f, &photo, json!({ "seed": 2 })),
        ),
        (
            "/v1/apply",
            apply_request(&mask, &f, json!({ "alpha_scale": 0.5 })),
        ),
        ("/v1/synthesize", json!({ "seed": 4 })),
    ];
    let mut forward = Vec::new();
    for (p, b) in &reqs {
        forward.push(post_json(p, b).await.body);
    }
    let mut backward = Vec::new();
    for (p, b) in reqs.iter().rev() {
        backward.push(post_json(p, b).await.body);
    }
    backward.reverse();
    assert_eq!(forward, backward);
}
