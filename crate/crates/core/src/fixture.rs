//! Synthetic street scenes for offline runs and tests.
//!
//! Each scene has a low-saturation sky, a road painted in
//! [`ROAD_GRAY`] (so the mock segmenter finds it for "the road"), and a dark
//! parked car. Label maps use Cityscapes train ids with an ignore border row.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::mock::ROAD_GRAY;
use crate::backend::{
    InpaintRequest, SegmentRequest, DEFAULT_DETECTION_THRESHOLD, DEFAULT_GUIDANCE, DEFAULT_STEPS,
};
use crate::codec::{write_label_map, write_png};
use crate::error::Result;
use crate::labels::LabelConvention;
use crate::prompt::{build_prompt, ClassRole};
use crate::raster::{BinaryMask, ImageBuffer, LabelMap, Region};

const ROAD: u16 = 0;
const SKY: u16 = 10;
const CAR: u16 = 13;

pub fn street_scene(width: u32, height: u32, seed: u64) -> Result<(ImageBuffer, LabelMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = height * 2 / 5;
    let sky = [
        150 + rng.gen_range(0..10),
        165 + rng.gen_range(0..10),
        180 + rng.gen_range(0..10),
    ];
    let mut img = ImageBuffer::filled(width, height, sky)?;
    let mut labels = LabelMap::filled(width, height, SKY)?;
    for y in horizon..height {
        for x in 0..width {
            let jitter = rng.gen_range(0..=4u8);
            img.put(x, y, ROAD_GRAY.map(|c| c - 2 + jitter));
            labels.set(x, y, ROAD);
        }
    }
    let car_w = width / 6;
    let car_h = height / 8;
    let car_x = rng.gen_range(0..width - car_w);
    let car_y = horizon + rng.gen_range(0..(height - horizon - car_h));
    for y in car_y..car_y + car_h {
        for x in car_x..car_x + car_w {
            img.put(x, y, [35, 38, 52]);
            labels.set(x, y, CAR);
        }
    }
    for x in 0..width {
        labels.set(x, 0, LabelConvention::cityscapes().ignore_id);
    }
    Ok((img, labels))
}

/// Writes `count` scenes as `<dir>/images/sceneNN.png` and
/// `<dir>/labels/sceneNN.png`.
pub fn write_street_fixture(
    dir: &Path,
    count: usize,
    width: u32,
    height: u32,
    seed: u64,
) -> Result<()> {
    let conv = LabelConvention::cityscapes();
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("labels"))?;
    for i in 0..count {
        let (img, labels) = street_scene(width, height, seed.wrapping_add(i as u64))?;
        let name = format!("scene{i:02}.png");
        write_png(&dir.join("images").join(&name), &img)?;
        write_label_map(&dir.join("labels").join(&name), &labels, &conv)?;
    }
    Ok(())
}

/// The inpainting request behind the recorded wire fixtures.
pub fn wire_inpaint_request() -> Result<InpaintRequest> {
    let (crop, _) = street_scene(64, 64, 1)?;
    Ok(InpaintRequest {
        mask: BinaryMask::from_region(64, 64, &Region::new(16, 28, 32, 24))?,
        crop,
        prompt: build_prompt("cat", "cat", 1, ClassRole::Ood)?.inpaint_prompt,
        seed: 42,
        steps: DEFAULT_STEPS,
        guidance: DEFAULT_GUIDANCE,
    })
}

/// The segmentation request that follows `wire_inpaint_request`, run on the
/// inpainted crop.
pub fn wire_segment_request(edited: ImageBuffer) -> SegmentRequest {
    SegmentRequest {
        crop: edited,
        prompt: "cat".to_string(),
        detection_threshold: DEFAULT_DETECTION_THRESHOLD,
    }
}
