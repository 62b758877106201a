//! JSON-over-HTTP client for external model servers.
//!
//! `POST {base}/v1/inpaint` with `{image, mask, prompt, seed, steps, guidance}`
//! answers `{image}`; `POST {base}/v1/segment` with `{image, prompt,
//! threshold}` answers `{detections: [{mask, score, label}]}`. Images and
//! masks travel as base64-encoded PNGs; request masks are 8-bit with 255 on
//! pixels to repaint, response masks treat any non-zero value as foreground.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::retry::RetryPolicy;
use super::{
    sort_detections, Detection, InpaintBackend, InpaintRequest, SegmentBackend, SegmentRequest,
};
use crate::codec::{decode_gray_png, decode_png, encode_gray_png, encode_png};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImageBuffer};

pub const INPAINT_PATH: &str = "/v1/inpaint";
pub const SEGMENT_PATH: &str = "/v1/segment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintWireRequest {
    pub image: String,
    pub mask: String,
    pub prompt: String,
    pub seed: u64,
    pub steps: u32,
    pub guidance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintWireResponse {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWireRequest {
    pub image: String,
    pub prompt: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub mask: String,
    pub score: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWireResponse {
    pub detections: Vec<WireDetection>,
}

pub fn encode_inpaint_request(req: &InpaintRequest) -> Result<Vec<u8>> {
    req.validate()?;
    let wire = InpaintWireRequest {
        image: B64.encode(encode_png(&req.crop)?),
        mask: B64.encode(encode_gray_png(&req.mask.to_luma())?),
        prompt: req.prompt.clone(),
        seed: req.seed,
        steps: req.steps,
        guidance: req.guidance,
    };
    Ok(serde_json::to_vec(&wire)?)
}

pub fn encode_segment_request(req: &SegmentRequest) -> Result<Vec<u8>> {
    req.validate()?;
    let wire = SegmentWireRequest {
        image: B64.encode(encode_png(&req.crop)?),
        prompt: req.prompt.clone(),
        threshold: req.detection_threshold,
    };
    Ok(serde_json::to_vec(&wire)?)
}

/// Server-side counterpart of [`decode_inpaint_response`].
pub fn encode_inpaint_response(image: &ImageBuffer) -> Result<Vec<u8>> {
    let wire = InpaintWireResponse {
        image: B64.encode(encode_png(image)?),
    };
    Ok(serde_json::to_vec(&wire)?)
}

/// Server-side counterpart of [`decode_segment_response`].
pub fn encode_segment_response(detections: &[Detection]) -> Result<Vec<u8>> {
    let detections = detections
        .iter()
        .map(|d| {
            Ok(WireDetection {
                mask: B64.encode(encode_gray_png(&d.mask.to_luma())?),
                score: d.confidence,
                label: d.label.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(serde_json::to_vec(&SegmentWireResponse { detections })?)
}

/// A body that ends early is a transport problem worth retrying; any other
/// malformed JSON is the server's fault and will not improve.
fn parse_json<'a, T: Deserialize<'a>>(body: &'a [u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_eof() {
            Error::retryable(format!("truncated response body: {e}"))
        } else {
            Error::fatal(format!("malformed response body: {e}"))
        }
    })
}

fn b64_png(field: &str, data: &str) -> Result<Vec<u8>> {
    B64.decode(data)
        .map_err(|e| Error::fatal(format!("response field `{field}` is not base64: {e}")))
}

pub fn decode_inpaint_response(body: &[u8], expected: (u32, u32)) -> Result<ImageBuffer> {
    let wire: InpaintWireResponse = parse_json(body)?;
    let image = decode_png(&b64_png("image", &wire.image)?)
        .map_err(|e| Error::fatal(format!("response image: {e}")))?;
    if image.dims() != expected {
        return Err(Error::fatal(format!(
            "dimension mismatch: sent {}x{}, received {}x{}",
            expected.0,
            expected.1,
            image.width(),
            image.height()
        )));
    }
    Ok(image)
}

pub fn decode_segment_response(body: &[u8], expected: (u32, u32)) -> Result<Vec<Detection>> {
    let wire: SegmentWireResponse = parse_json(body)?;
    let mut dets = wire
        .detections
        .into_iter()
        .map(|d| {
            let gray = decode_gray_png(&b64_png("mask", &d.mask)?)
                .map_err(|e| Error::fatal(format!("detection mask: {e}")))?;
            let mask = BinaryMask::from_luma(&gray)?;
            if mask.dims() != expected {
                return Err(Error::fatal(format!(
                    "dimension mismatch: detection mask {:?} for crop {:?}",
                    mask.dims(),
                    expected
                )));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::fatal(format!(
                    "detection score {} outside [0, 1]",
                    d.score
                )));
            }
            Ok(Detection {
                mask,
                confidence: d.score,
                label: d.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_detections(&mut dets);
    Ok(dets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub base_url: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".to_string(),
            timeout_secs: 300,
            retry: RetryPolicy::default(),
        }
    }
}

/// Client for both endpoints. Holds no per-request state, so one instance can
/// serve any number of concurrent callers.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(cfg: &HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            client,
            retry: cfg.retry.clone(),
        })
    }

    /// One retry loop covers sending, reading and decoding: truncation can
    /// surface as a failed body read or as a short JSON document.
    fn call<T>(&self, path: &str, body: &[u8], decode: impl Fn(&[u8]) -> Result<T>) -> Result<T> {
        let url = format!("{}{path}", self.base_url);
        self.retry.run(path, |_| {
            let resp = self
                .client
                .post(&url)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.to_vec())
                .send()
                .map_err(|e| Error::retryable(format!("POST {url}: {e}")))?;
            let status = resp.status();
            if !status.is_success() {
                let msg = format!("POST {url}: HTTP {status}");
                let transient = status.is_server_error()
                    || status == reqwest::StatusCode::TOO_MANY_REQUESTS
                    || status == reqwest::StatusCode::REQUEST_TIMEOUT;
                return Err(if transient {
                    Error::retryable(msg)
                } else {
                    Error::fatal(msg)
                });
            }
            let bytes = resp
                .bytes()
                .map_err(|e| Error::retryable(format!("POST {url}: reading body: {e}")))?;
            decode(&bytes)
        })
    }
}

impl InpaintBackend for HttpBackend {
    fn inpaint(&self, req: &InpaintRequest) -> Result<ImageBuffer> {
        let body = encode_inpaint_request(req)?;
        let dims = req.crop.dims();
        self.call(INPAINT_PATH, &body, |resp| {
            decode_inpaint_response(resp, dims)
        })
    }
}

impl SegmentBackend for HttpBackend {
    fn segment(&self, req: &SegmentRequest) -> Result<Vec<Detection>> {
        let body = encode_segment_request(req)?;
        let dims = req.crop.dims();
        self.call(SEGMENT_PATH, &body, |resp| {
            decode_segment_response(resp, dims)
        })
    }
}
