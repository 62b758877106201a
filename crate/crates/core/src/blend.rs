//! Post-inpainting stages: annotation with failure rejection, Gaussian mask
//! feathering, blending, and pasting back into the full image.

use serde::{Deserialize, Serialize};

use crate::backend::{SegmentBackend, SegmentRequest};
use crate::error::{Error, Result};
use crate::labels::LabelConvention;
use crate::prompt::PromptSet;
use crate::raster::{BinaryMask, ImageBuffer, LabelMap, Region, SoftMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    /// Kernel half-width in multiples of `sigma`.
    pub truncate: f64,
    /// Minimum object area as a fraction of the inpainted region.
    pub min_object_area: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            truncate: 3.0,
            min_object_area: 0.01,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::Config(format!(
                "blend.sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.truncate.is_nan() || self.truncate < 1.0 {
            return Err(Error::Config(format!(
                "blend.truncate must be at least 1, got {}",
                self.truncate
            )));
        }
        if !(0.0..1.0).contains(&self.min_object_area) {
            return Err(Error::Config(format!(
                "blend.min_object_area must lie in [0, 1), got {}",
                self.min_object_area
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        (self.truncate * self.sigma + 0.5).floor() as usize
    }
}

/// Segments the inpainted crop for the object prompt and keeps the most
/// confident detection. No detection, or one smaller than
/// `min_object_area` of `region`, rejects the generation.
pub fn annotate(
    crop_edited: &ImageBuffer,
    prompt: &PromptSet,
    region: &Region,
    backend: &dyn SegmentBackend,
    cfg: &BlendConfig,
    detection_threshold: f64,
) -> Result<BinaryMask> {
    let detections = backend.segment(&SegmentRequest {
        crop: crop_edited.clone(),
        prompt: prompt.object_prompt.clone(),
        detection_threshold,
    })?;
    let best = detections.into_iter().next().ok_or_else(|| {
        Error::GenerationRejected(format!(
            "no `{}` detected in the inpainted crop",
            prompt.object_prompt
        ))
    })?;
    if best.mask.dims() != crop_edited.dims() {
        return Err(Error::Shape(format!(
            "detection mask {:?} vs crop {:?}",
            best.mask.dims(),
            crop_edited.dims()
        )));
    }
    let area = best.mask.count() as f64;
    let needed = cfg.min_object_area * region.area() as f64;
    if area == 0.0 || area < needed {
        return Err(Error::GenerationRejected(format!(
            "object area {area} px below minimum {needed:.1} px"
        )));
    }
    Ok(best.mask)
}

fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// One axis of the convolution. Taps falling outside the raster are dropped
/// and the remaining ones renormalized.
fn convolve_axis(
    src: &[f64],
    width: usize,
    height: usize,
    taps: &[f64],
    horizontal: bool,
) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    let (len, lines) = if horizontal {
        (width, height)
    } else {
        (height, width)
    };
    let at = |line: usize, pos: usize| {
        if horizontal {
            line * width + pos
        } else {
            pos * width + line
        }
    };
    for line in 0..lines {
        for pos in 0..len {
            let (mut acc, mut norm) = (0.0, 0.0);
            let lo = (pos as i64 - r).max(0);
            let hi = (pos as i64 + r).min(len as i64 - 1);
            for q in lo..=hi {
                let t = taps[(q - pos as i64 + r) as usize];
                acc += t * src[at(line, q as usize)];
                norm += t;
            }
            out[at(line, pos)] = acc / norm;
        }
    }
    out
}

/// Convolves the 0/1 mask with a normalized Gaussian truncated at
/// `truncate * sigma`. Near the border the kernel is renormalized over its
/// in-bounds support, so an all-true mask maps to all ones.
pub fn feather(mask: &BinaryMask, cfg: &BlendConfig) -> Result<SoftMask> {
    cfg.validate()?;
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let src: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let taps = gaussian_taps(cfg.sigma, cfg.radius());
    let tmp = convolve_axis(&src, w, h, &taps, true);
    let out = convolve_axis(&tmp, w, h, &taps, false);
    SoftMask::new(mask.width(), mask.height(), out)
}

/// Per pixel and channel: `round((1 - w) * original + w * edited)`, rounding
/// half away from zero.
pub fn blend(original: &ImageBuffer, edited: &ImageBuffer, soft: &SoftMask) -> Result<ImageBuffer> {
    if original.dims() != edited.dims() || original.dims() != soft.dims() {
        return Err(Error::Shape(format!(
            "blend inputs {:?}, {:?}, mask {:?}",
            original.dims(),
            edited.dims(),
            soft.dims()
        )));
    }
    let out = original
        .as_bytes()
        .chunks_exact(3)
        .zip(edited.as_bytes().chunks_exact(3))
        .zip(soft.weights())
        .flat_map(|((o, e), &w)| {
            (0..3).map(move |c| ((1.0 - w) * o[c] as f64 + w * e[c] as f64).round() as u8)
        })
        .collect();
    ImageBuffer::new(original.width(), original.height(), out)
}

/// Result of one object insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub image: ImageBuffer,
    pub labels: LabelMap,
    /// Object pixels in full-image coordinates.
    pub object_mask: BinaryMask,
    pub prompt: PromptSet,
    pub region: Region,
    pub crop: Region,
    pub seed: u64,
}

/// Pastes the blended crop back and writes `class_id` wherever the binary
/// object mask (crop coordinates) is set. Returns the new image, label map
/// and the object mask lifted to full-image coordinates.
pub fn paste_and_label(
    base_image: &ImageBuffer,
    base_labels: &LabelMap,
    crop: &Region,
    blended_crop: &ImageBuffer,
    object_mask: &BinaryMask,
    class_id: u16,
    convention: &LabelConvention,
) -> Result<(ImageBuffer, LabelMap, BinaryMask)> {
    convention.check_assignable(class_id)?;
    if base_image.dims() != base_labels.dims() {
        return Err(Error::Shape(format!(
            "image {:?} vs labels {:?}",
            base_image.dims(),
            base_labels.dims()
        )));
    }
    if object_mask.dims() != (crop.w, crop.h) {
        return Err(Error::Shape(format!(
            "object mask {:?} vs crop {}x{}",
            object_mask.dims(),
            crop.w,
            crop.h
        )));
    }
    let mut image = base_image.clone();
    image.paste(crop, blended_crop)?;
    let mut labels = base_labels.clone();
    let mut full_mask = BinaryMask::filled(base_image.width(), base_image.height(), false)?;
    for y in 0..crop.h {
        for x in 0..crop.w {
            if object_mask.get(x, y) {
                labels.set(crop.x0 + x, crop.y0 + y, class_id);
                full_mask.set(crop.x0 + x, crop.y0 + y, true);
            }
        }
    }
    Ok((image, labels, full_mask))
}
