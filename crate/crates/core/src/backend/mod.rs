//! Inpainting and open-vocabulary segmentation backends.
//!
//! Two implementations share the [`InpaintBackend`] / [`SegmentBackend`]
//! contracts: [`http::HttpBackend`] talks to a model server over a small JSON
//! protocol, and [`mock`] renders and recovers procedural ellipses so the
//! whole pipeline can run offline with an exact oracle.

pub mod components;
pub mod http;
pub mod mock;
pub mod retry;
pub mod stub;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImageBuffer};

pub const DEFAULT_STEPS: u32 = 50;
pub const DEFAULT_GUIDANCE: f64 = 7.5;
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintRequest {
    pub crop: ImageBuffer,
    /// `true` marks pixels to repaint.
    pub mask: BinaryMask,
    pub prompt: String,
    pub seed: u64,
    pub steps: u32,
    pub guidance: f64,
}

impl InpaintRequest {
    pub fn validate(&self) -> Result<()> {
        if self.crop.dims() != self.mask.dims() {
            return Err(Error::Shape(format!(
                "inpaint crop {:?} vs mask {:?}",
                self.crop.dims(),
                self.mask.dims()
            )));
        }
        if self.mask.is_empty() {
            return Err(Error::Shape("inpaint mask has no pixels to repaint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRequest {
    pub crop: ImageBuffer,
    pub prompt: String,
    pub detection_threshold: f64,
}

impl SegmentRequest {
    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(Error::Prompt("empty segmentation prompt".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mask: BinaryMask,
    pub confidence: f64,
    pub label: String,
}

pub trait InpaintBackend: Send + Sync {
    /// Returns an image with the dimensions of `req.crop`.
    fn inpaint(&self, req: &InpaintRequest) -> Result<ImageBuffer>;
}

pub trait SegmentBackend: Send + Sync {
    /// Detections for `req.prompt`, highest confidence first. An empty list
    /// means nothing was found.
    fn segment(&self, req: &SegmentRequest) -> Result<Vec<Detection>>;
}

/// Confidence descending; larger masks first on ties so the order is total.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| b.mask.count().cmp(&a.mask.count()))
    });
}
