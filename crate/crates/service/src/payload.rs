use std::collections::HashMap;

use axum::body::{to_bytes, Body};
use axum::extract::{FromRequest, Multipart, Request};
use axum::http::{header, StatusCode};
use base64::Engine;
use serde::de::DeserializeOwned;

use crate::ApiError;

pub const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

/// Fields carried as binary images; everything else is JSON.
const IMAGE_FIELDS: [&str; 4] = ["photo", "parsing", "mask", "frame"];

fn too_large() -> ApiError {
    ApiError::new(
        StatusCode::PAYLOAD_TOO_LARGE,
        "payload_too_large",
        format!("request body exceeds {MAX_BODY_BYTES} bytes"),
    )
}

/// A request body split into image bytes and JSON values by field name.
#[derive(Debug, Default)]
pub(crate) struct Payload {
    images: HashMap<String, Vec<u8>>,
    json: HashMap<String, serde_json::Value>,
}

impl Payload {
    pub(crate) async fn from_request(req: Request) -> Result<Payload, ApiError> {
        let declared = req
            .headers()
            .get(header::CONTENT_LENGTH)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<usize>().ok());
        if declared.is_some_and(|n| n > MAX_BODY_BYTES) {
            return Err(too_large());
        }
        let is_multipart = req
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("multipart/form-data"));
        let (parts, body) = req.into_parts();
        let bytes = to_bytes(body, MAX_BODY_BYTES)
            .await
            .map_err(|_| too_large())?;
        if is_multipart {
            let req = Request::from_parts(parts, Body::from(bytes));
            let mp = Multipart::from_request(req, &())
                .await
                .map_err(|e| ApiError::bad_request("invalid_multipart", e.body_text()))?;
            Payload::from_multipart(mp).await
        } else {
            Payload::from_json(&bytes)
        }
    }

    async fn from_multipart(mut mp: Multipart) -> Result<Payload, ApiError> {
        let mut p = Payload::default();
        while let Some(field) = mp
            .next_field()
            .await
            .map_err(|e| ApiError::bad_request("invalid_multipart", e.body_text()))?
        {
            let name = field.name().unwrap_or_default().to_owned();
            let data = field
                .bytes()
                .await
                .map_err(|e| ApiError::bad_request("invalid_multipart", e.body_text()))?;
            if IMAGE_FIELDS.contains(&name.as_str()) {
                p.images.insert(name, data.to_vec());
            } else {
                let v = serde_json::from_slice(&data).map_err(|e| {
                    ApiError::bad_request("invalid_json", format!("field `{name}`: {e}"))
                })?;
                p.json.insert(name, v);
            }
        }
        Ok(p)
    }

    fn from_json(bytes: &[u8]) -> Result<Payload, ApiError> {
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(bytes)
            .map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?;
        let mut p = Payload::default();
        for (name, v) in obj {
            if IMAGE_FIELDS.contains(&name.as_str()) {
                let s = v.as_str().ok_or_else(|| {
                    ApiError::bad_request(
                        "undecodable_input",
                        format!("`{name}` must be a base64 string"),
                    )
                })?;
                let data = base64::engine::general_purpose::STANDARD
                    .decode(s.trim())
                    .map_err(|e| {
                        ApiError::bad_request("undecodable_input", format!("`{name}`: {e}"))
                    })?;
                p.images.insert(name, data);
            } else {
                p.json.insert(name, v);
            }
        }
        Ok(p)
    }

    pub(crate) fn image(&self, name: &str) -> Option<&[u8]> {
        self.images.get(name).map(Vec::as_slice)
    }

    pub(crate) fn require_image(&self, name: &str) -> Result<&[u8], ApiError> {
        self.image(name)
            .ok_or_else(|| ApiError::bad_request("missing_field", format!("`{name}` is required")))
    }

    pub(crate) fn require_json(&self, name: &str) -> Result<&serde_json::Value, ApiError> {
        self.json
            .get(name)
            .ok_or_else(|| ApiError::bad_request("missing_field", format!("`{name}` is required")))
    }

    pub(crate) fn parse_json<T: DeserializeOwned>(
        &self,
        name: &str,
    ) -> Result<Option<T>, ApiError> {
        self.json
            .get(name)
            .map(|v| {
                T::deserialize(v).map_err(|e| {
                    ApiError::bad_request("invalid_parameter", format!("`{name}`: {e}"))
                })
            })
            .transpose()
    }
}
