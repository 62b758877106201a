//! On-disk formats: RGB PNG images, 8-bit label-map PNGs and `POCSCORE` score
//! maps.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::labels::LabelConvention;
use crate::raster::{ImageBuffer, LabelMap};

pub const SCORE_MAGIC: &[u8; 8] = b"POCSCORE";
const SCORE_HEADER_LEN: usize = 16;

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.to_rgb_image().write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes any PNG and converts it to 8-bit RGB.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    ImageBuffer::from_rgb_image(img.into_rgb8())
}

pub fn encode_gray_png(img: &image::GrayImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_gray_png(bytes: &[u8]) -> Result<image::GrayImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    match img {
        image::DynamicImage::ImageLuma8(g) => Ok(g),
        other => Err(Error::InvalidRaster(format!(
            "expected an 8-bit single-channel PNG, got {:?}",
            other.color()
        ))),
    }
}

pub fn read_png(path: &Path) -> Result<ImageBuffer> {
    decode_png(&std::fs::read(path)?)
}

pub fn write_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

/// Encodes a label map as an 8-bit grayscale PNG. Every value must belong to
/// `convention` and fit in a byte.
pub fn encode_label_map(labels: &LabelMap, convention: &LabelConvention) -> Result<Vec<u8>> {
    let mut img = image::GrayImage::new(labels.width(), labels.height());
    for (i, (&v, px)) in labels.labels().iter().zip(img.pixels_mut()).enumerate() {
        if v > u8::MAX as u16 {
            return Err(Error::LabelValue(format!(
                "label {v} at index {i} does not fit in 8 bits"
            )));
        }
        if !convention.contains(v) {
            return Err(Error::LabelValue(format!(
                "label {v} at index {i} is not part of the label convention"
            )));
        }
        *px = Luma([v as u8]);
    }
    encode_gray_png(&img)
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    let img = decode_gray_png(bytes)?;
    let (w, h) = img.dimensions();
    LabelMap::new(w, h, img.into_raw().into_iter().map(u16::from).collect())
}

pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    decode_label_map(&std::fs::read(path)?)
}

pub fn write_label_map(path: &Path, labels: &LabelMap, convention: &LabelConvention) -> Result<()> {
    std::fs::write(path, encode_label_map(labels, convention)?)?;
    Ok(())
}

/// Per-pixel anomaly scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: u32,
    pub height: u32,
    pub scores: Vec<f32>,
}

impl ScoreMap {
    pub fn new(width: u32, height: u32, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != width as usize * height as usize {
            return Err(Error::ScoreMap(format!(
                "{} scores for a {width}x{height} map",
                scores.len()
            )));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    /// Magic, width and height (u32 LE), then the scores as f32 LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCORE_HEADER_LEN + self.scores.len() * 4);
        out.extend_from_slice(SCORE_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for s in &self.scores {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SCORE_HEADER_LEN || &bytes[..8] != SCORE_MAGIC {
            return Err(Error::ScoreMap("missing POCSCORE header".into()));
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let body = &bytes[SCORE_HEADER_LEN..];
        let expected = width as usize * height as usize * 4;
        if body.len() != expected {
            return Err(Error::ScoreMap(format!(
                "{width}x{height} map needs {expected} payload bytes, found {}",
                body.len()
            )));
        }
        let scores = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(width, height, scores)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
