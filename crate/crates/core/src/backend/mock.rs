//! Deterministic procedural backends.
//!
//! The mock inpainter paints a filled ellipse, colored by the prompt, inside
//! the bounding box of the repaint mask. The mock segmenter finds pixels
//! within a small color distance of the prompt's color and returns their
//! connected components. Feeding one into the other recovers the painted
//! ellipse exactly, which gives the pipeline an end-to-end oracle.

use sha2::{Digest, Sha256};

use super::components::connected_components;
use super::{
    sort_detections, Detection, InpaintBackend, InpaintRequest, SegmentBackend, SegmentRequest,
};
use crate::error::{Error, Result};
use crate::prompt::INPAINT_TEMPLATE_PREFIX;
use crate::raster::{BinaryMask, ImageBuffer, Region};

/// Color the default mock segmenter associates with "the road".
pub const ROAD_GRAY: [u8; 3] = [128, 128, 128];
pub const MOCK_CONFIDENCE: f64 = 0.9;
/// Per-channel L-infinity color distance for a pixel to match.
pub const MOCK_COLOR_TOLERANCE: u8 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axes.
    pub rx: f64,
    pub ry: f64,
    pub color: [u8; 3],
}

impl EllipseSpec {
    /// Pixel `(x, y)` is inside when its center falls in the closed ellipse.
    pub fn contains(&self, x: u32, y: u32) -> bool {
        let dx = (x as f64 + 0.5 - self.cx) / self.rx;
        let dy = (y as f64 + 0.5 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }

    pub fn pixel_mask(&self, width: u32, height: u32) -> Result<BinaryMask> {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| self.contains(x, y))
            .collect();
        BinaryMask::new(width, height, bits)
    }
}

fn sha_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Hue in degrees, `[0, 360)`.
pub fn prompt_hue(prompt: &str) -> u32 {
    (sha_u64(&[prompt.as_bytes()]) % 360) as u32
}

pub fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [u8; 3] {
    let c = val * sat;
    let h = (hue.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

pub fn prompt_color(prompt: &str) -> [u8; 3] {
    hsv_to_rgb(prompt_hue(prompt) as f64, 0.8, 0.9)
}

/// Ellipse the mock inpainter paints for `prompt` inside `region`.
pub fn mock_render_spec(prompt: &str, region: &Region, seed: u64) -> EllipseSpec {
    let bits = sha_u64(&[prompt.as_bytes(), &seed.to_le_bytes()]);
    let u = (bits >> 11) as f64 / (1u64 << 53) as f64;
    let margin = 0.1 + 0.15 * u;
    EllipseSpec {
        cx: region.x0 as f64 + region.w as f64 / 2.0,
        cy: region.y0 as f64 + region.h as f64 / 2.0,
        rx: region.w as f64 / 2.0 * (1.0 - margin),
        ry: region.h as f64 / 2.0 * (1.0 - margin),
        color: prompt_color(prompt),
    }
}

/// Object named by an inpainting prompt: the template prefix is stripped so
/// that the inpainter and the segmenter agree on the color of an object.
pub fn object_of(inpaint_prompt: &str) -> &str {
    inpaint_prompt
        .strip_prefix(INPAINT_TEMPLATE_PREFIX)
        .unwrap_or(inpaint_prompt)
}

#[derive(Debug, Clone, Default)]
pub struct MockInpainter;

impl InpaintBackend for MockInpainter {
    fn inpaint(&self, req: &InpaintRequest) -> Result<ImageBuffer> {
        req.validate()?;
        let bbox = req
            .mask
            .bounding_box()
            .ok_or_else(|| Error::fatal("empty inpaint mask"))?;
        let spec = mock_render_spec(object_of(&req.prompt), &bbox, req.seed);
        let mut out = req.crop.clone();
        for y in bbox.y0..bbox.y1() {
            for x in bbox.x0..bbox.x1() {
                if req.mask.get(x, y) && spec.contains(x, y) {
                    out.put(x, y, spec.color);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct MockSegmenter {
    /// Prompts that map to a fixed color instead of the hashed one.
    pub surfaces: Vec<(String, [u8; 3])>,
    /// When set, every non-surface prompt comes back empty.
    pub miss_objects: bool,
    pub tolerance: u8,
    pub confidence: f64,
}

impl Default for MockSegmenter {
    fn default() -> Self {
        Self {
            surfaces: vec![("the road".to_string(), ROAD_GRAY)],
            miss_objects: false,
            tolerance: MOCK_COLOR_TOLERANCE,
            confidence: MOCK_CONFIDENCE,
        }
    }
}

impl MockSegmenter {
    pub fn always_miss() -> Self {
        Self {
            miss_objects: true,
            ..Self::default()
        }
    }

    fn target_color(&self, prompt: &str) -> Option<[u8; 3]> {
        if let Some((_, c)) = self.surfaces.iter().find(|(p, _)| p == prompt) {
            return Some(*c);
        }
        (!self.miss_objects).then(|| prompt_color(prompt))
    }
}

impl SegmentBackend for MockSegmenter {
    fn segment(&self, req: &SegmentRequest) -> Result<Vec<Detection>> {
        req.validate()?;
        if self.confidence < req.detection_threshold {
            return Ok(Vec::new());
        }
        let Some(target) = self.target_color(&req.prompt) else {
            return Ok(Vec::new());
        };
        let (w, h) = req.crop.dims();
        let bits = req
            .crop
            .as_bytes()
            .chunks_exact(3)
            .map(|px| {
                px.iter()
                    .zip(target)
                    .all(|(&a, b)| a.abs_diff(b) <= self.tolerance)
            })
            .collect();
        let matched = BinaryMask::new(w, h, bits)?;
        let mut dets: Vec<Detection> = connected_components(&matched)
            .into_iter()
            .map(|mask| Detection {
                mask,
                confidence: self.confidence,
                label: req.prompt.clone(),
            })
            .collect();
        sort_detections(&mut dets);
        Ok(dets)
    }
}
