//! Raster types shared by every stage of the pipeline.
//!
//! All rasters are row-major with the origin at the top-left corner; `x` grows
//! to the right and `y` grows downwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} bytes for {width}x{height} RGB, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies out the pixels covered by `region`.
    pub fn crop(&self, region: &Region) -> Result<ImageBuffer> {
        region.check_inside(self.width, self.height)?;
        let mut out = Vec::with_capacity(region.w as usize * region.h as usize * 3);
        for y in region.y0..region.y0 + region.h {
            let start = self.offset(region.x0, y);
            out.extend_from_slice(&self.pixels[start..start + region.w as usize * 3]);
        }
        ImageBuffer::new(region.w, region.h, out)
    }

    /// Writes `patch` with its top-left corner at `(region.x0, region.y0)`.
    pub fn paste(&mut self, region: &Region, patch: &ImageBuffer) -> Result<()> {
        region.check_inside(self.width, self.height)?;
        if patch.dims() != (region.w, region.h) {
            return Err(Error::Shape(format!(
                "patch is {}x{}, region is {}x{}",
                patch.width, patch.height, region.w, region.h
            )));
        }
        let row = region.w as usize * 3;
        for dy in 0..region.h {
            let dst = self.offset(region.x0, region.y0 + dy);
            let src = dy as usize * row;
            self.pixels[dst..dst + row].copy_from_slice(&patch.pixels[src..src + row]);
        }
        Ok(())
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("dimensions checked at construction")
    }

    pub fn from_rgb_image(img: image::RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        ImageBuffer::new(w, h, img.into_raw())
    }
}

/// Boolean raster; `true` marks membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} mask bits for {width}x{height}, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        })
    }

    /// Mask that is true exactly on `region`.
    pub fn from_region(width: u32, height: u32, region: &Region) -> Result<Self> {
        region.check_inside(width, height)?;
        let mut mask = Self::filled(width, height, false)?;
        for y in region.y0..region.y0 + region.h {
            for x in region.x0..region.x0 + region.w {
                mask.set(x, y, true);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// In-place union. Dimensions must agree.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "mask union of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Tight bounding box of the true pixels, `None` when the mask is empty.
    pub fn bounding_box(&self) -> Option<Region> {
        let (mut x_min, mut y_min, mut x_max, mut y_max) = (u32::MAX, u32::MAX, 0, 0);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x_min = x_min.min(x);
                    y_min = y_min.min(y);
                    x_max = x_max.max(x);
                    y_max = y_max.max(y);
                }
            }
        }
        any.then(|| Region::new(x_min, y_min, x_max - x_min + 1, y_max - y_min + 1))
    }

    pub fn to_luma(&self) -> image::GrayImage {
        let raw = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width, self.height, raw)
            .expect("dimensions checked at construction")
    }

    /// Any non-zero value becomes `true`.
    pub fn from_luma(img: &image::GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        BinaryMask::new(w, h, img.as_raw().iter().map(|&v| v != 0).collect())
    }
}

/// Real-valued weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    width: u32,
    height: u32,
    weights: Vec<f64>,
}

impl SoftMask {
    /// Builds a soft mask, clamping every weight into `[0, 1]`.
    pub fn new(width: u32, height: u32, weights: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if weights.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} weights for {width}x{height}, got {}",
                width as usize * height as usize,
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(Error::InvalidRaster("NaN weight in soft mask".into()));
        }
        let weights = weights.into_iter().map(|w| w.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.weights[y as usize * self.width as usize + x as usize]
    }
}

/// Single-channel label raster. Values are wider than 8 bits so that
/// out-of-range ids can be represented and rejected at encode time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<u16>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} labels for {width}x{height}, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u16) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u16) {
        let i = y as usize * self.width as usize + x as usize;
        self.labels[i] = value;
    }

    pub fn map(&self, f: impl Fn(u16) -> u16) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Axis-aligned pixel rectangle, top-left inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub const fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Self { x0, y0, w, h }
    }

    /// Exclusive right edge.
    pub fn x1(&self) -> u32 {
        self.x0 + self.w
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> u32 {
        self.y0 + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn contains(&self, other: &Region) -> bool {
        other.x0 >= self.x0
            && other.y0 >= self.y0
            && other.x1() <= self.x1()
            && other.y1() <= self.y1()
    }

    /// `self` expressed in the coordinate frame of `outer`.
    pub fn relative_to(&self, outer: &Region) -> Region {
        Region::new(self.x0 - outer.x0, self.y0 - outer.y0, self.w, self.h)
    }

    pub fn check_inside(&self, width: u32, height: u32) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::Shape(format!("degenerate region {self:?}")));
        }
        if self.x1() > width || self.y1() > height {
            return Err(Error::Shape(format!(
                "region {self:?} exceeds {width}x{height} raster"
            )));
        }
        Ok(())
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidRaster(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}
