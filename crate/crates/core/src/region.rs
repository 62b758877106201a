//! Choosing where an object goes: the valid area from the location prompt,
//! a random region inside it, and the square crop handed to the inpainter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{SegmentBackend, SegmentRequest};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImageBuffer, Region};

/// Location prompt meaning "anywhere in the image".
pub const UNCONSTRAINED: &str = "unconstrained";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementMode {
    /// Centers restricted to the valid area of the location prompt.
    #[default]
    Guided,
    /// Uniform over the whole image, ignoring the location prompt.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    /// Region side bounds as fractions of the image's shorter side.
    pub min_frac: f64,
    pub max_frac: f64,
    pub max_attempts: u32,
    /// Fraction of the region's bottom row that must rest on valid pixels.
    pub overlap_threshold: f64,
    pub placement_mode: PlacementMode,
    pub crop_multiple: u32,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            min_frac: 0.05,
            max_frac: 0.35,
            max_attempts: 50,
            overlap_threshold: 0.6,
            placement_mode: PlacementMode::Guided,
            crop_multiple: 64,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.min_frac) || !frac_ok(self.max_frac) {
            return Err(Error::Config(format!(
                "placement.min_frac/max_frac must lie in (0, 1], got {}/{}",
                self.min_frac, self.max_frac
            )));
        }
        if self.min_frac > self.max_frac {
            return Err(Error::Config(
                "placement.min_frac exceeds placement.max_frac".into(),
            ));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config(
                "placement.max_attempts must be at least 1".into(),
            ));
        }
        if !frac_ok(self.overlap_threshold) {
            return Err(Error::Config(format!(
                "placement.overlap_threshold must lie in (0, 1], got {}",
                self.overlap_threshold
            )));
        }
        if self.crop_multiple == 0 {
            return Err(Error::Config(
                "placement.crop_multiple must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub region: Region,
    pub crop: Region,
    /// The drawn center pixel; always inside `region`.
    pub center: (u32, u32),
    pub attempts_used: u32,
}

/// Valid placement area for `location_prompt`: the union of every detection
/// returned for it. Random placement and the unconstrained prompt skip the
/// backend and allow the whole image.
pub fn valid_area(
    image: &ImageBuffer,
    location_prompt: &str,
    mode: PlacementMode,
    backend: &dyn SegmentBackend,
    detection_threshold: f64,
) -> Result<BinaryMask> {
    let (w, h) = image.dims();
    if mode == PlacementMode::Random || location_prompt == UNCONSTRAINED {
        return BinaryMask::filled(w, h, true);
    }
    if location_prompt.trim().is_empty() {
        return Err(Error::Prompt("empty location prompt".into()));
    }
    let detections = backend.segment(&SegmentRequest {
        crop: image.clone(),
        prompt: location_prompt.to_string(),
        detection_threshold,
    })?;
    let mut mask = BinaryMask::filled(w, h, false)?;
    for det in &detections {
        mask.union_with(&det.mask)?;
    }
    Ok(mask)
}

/// Smallest square around `region` whose side is a multiple of `multiple`,
/// shifted to stay inside a `width`x`height` image. When no such square fits,
/// the side falls back to the image's shorter dimension.
pub fn square_crop(region: &Region, width: u32, height: u32, multiple: u32) -> Region {
    let short = width.min(height);
    let need = region.w.max(region.h);
    let mut side = need.div_ceil(multiple) * multiple;
    if side > short {
        side = short;
    }
    let place = |start: u32, len: u32, extent: u32| -> u32 {
        let centered = start as i64 - (side as i64 - len as i64) / 2;
        centered.clamp(0, (extent - side) as i64) as u32
    };
    Region::new(
        place(region.x0, region.w, width),
        place(region.y0, region.h, height),
        side,
        side,
    )
}

/// Draws regions from a fixed valid mask. Precomputes the mask support so
/// repeated draws cost O(1) each plus the bottom-edge check.
pub struct RegionSampler<'a> {
    valid: &'a BinaryMask,
    cfg: &'a PlacementConfig,
    support: Vec<u32>,
}

impl<'a> RegionSampler<'a> {
    pub fn new(valid: &'a BinaryMask, cfg: &'a PlacementConfig) -> Self {
        let support = match cfg.placement_mode {
            PlacementMode::Guided => valid
                .bits()
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i as u32))
                .collect(),
            PlacementMode::Random => Vec::new(),
        };
        Self {
            valid,
            cfg,
            support,
        }
    }

    fn side_bounds(&self) -> (u32, u32) {
        let short = self.valid.width().min(self.valid.height()) as f64;
        let lo = ((self.cfg.min_frac * short).ceil() as u32).max(1);
        let hi = ((self.cfg.max_frac * short).floor() as u32).max(lo);
        (lo, hi.min(short as u32))
    }

    fn draw_center<R: Rng>(&self, rng: &mut R) -> (u32, u32) {
        let width = self.valid.width();
        match self.cfg.placement_mode {
            PlacementMode::Guided => {
                let idx = self.support[rng.gen_range(0..self.support.len())];
                (idx % width, idx / width)
            }
            PlacementMode::Random => (
                rng.gen_range(0..width),
                rng.gen_range(0..self.valid.height()),
            ),
        }
    }

    fn bottom_overlap(&self, region: &Region) -> f64 {
        let y = region.y1() - 1;
        let on = (region.x0..region.x1())
            .filter(|&x| self.valid.get(x, y))
            .count();
        on as f64 / region.w as f64
    }

    /// Draws one candidate and tests it; `None` means the candidate failed
    /// the bottom-edge test.
    pub fn propose<R: Rng>(&self, rng: &mut R) -> Option<(Region, (u32, u32))> {
        let (width, height) = self.valid.dims();
        let (lo, hi) = self.side_bounds();
        let w = rng.gen_range(lo..=hi).min(width);
        let h = rng.gen_range(lo..=hi).min(height);
        let (cx, cy) = self.draw_center(rng);
        let x0 = (cx as i64 - (w / 2) as i64).clamp(0, (width - w) as i64) as u32;
        let y0 = (cy as i64 - (h / 2) as i64).clamp(0, (height - h) as i64) as u32;
        let region = Region::new(x0, y0, w, h);
        let accepted = self.cfg.placement_mode == PlacementMode::Random
            || self.bottom_overlap(&region) >= self.cfg.overlap_threshold;
        accepted.then_some((region, (cx, cy)))
    }

    /// Up to `budget` proposals; the first accepted one wins.
    pub fn sample<R: Rng>(&self, rng: &mut R, budget: u32) -> Result<PlacementOutcome> {
        if self.cfg.placement_mode == PlacementMode::Guided && self.support.is_empty() {
            return Err(Error::NoValidRegion { attempts: 0 });
        }
        let (width, height) = self.valid.dims();
        for attempt in 1..=budget {
            if let Some((region, center)) = self.propose(rng) {
                return Ok(PlacementOutcome {
                    region,
                    crop: square_crop(&region, width, height, self.cfg.crop_multiple),
                    center,
                    attempts_used: attempt,
                });
            }
        }
        Err(Error::NoValidRegion { attempts: budget })
    }
}

/// Samples a region inside `valid`, retrying up to `cfg.max_attempts` times.
pub fn sample_region<R: Rng>(
    valid: &BinaryMask,
    cfg: &PlacementConfig,
    rng: &mut R,
) -> Result<PlacementOutcome> {
    cfg.validate()?;
    RegionSampler::new(valid, cfg).sample(rng, cfg.max_attempts)
}
