#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use poc_core::backend::mock::mock_render_spec;
use poc_core::codec::{read_label_map, read_png};
use poc_core::dataset::manifest::ManifestEntry;
use poc_core::raster::Region;

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Checks one accepted sample against the mock render oracle. Returns a
/// description of the first violation.
pub fn check_closure(input: &Path, output: &Path, e: &ManifestEntry) -> Result<(), String> {
    let region = e.region.ok_or("accepted entry without region")?;
    let crop = e.crop.ok_or("accepted entry without crop")?;
    let seed = e.seed.ok_or("accepted entry without seed")?;
    let src = read_png(&input.join(&e.source_image)).map_err(|x| x.to_string())?;
    let out_img =
        read_png(&output.join(e.output_image.as_ref().unwrap())).map_err(|x| x.to_string())?;
    let labels = read_label_map(&output.join(e.output_labels.as_ref().unwrap()))
        .map_err(|x| x.to_string())?;

    let in_crop = Region::new(region.x0 - crop.x0, region.y0 - crop.y0, region.w, region.h);
    let spec = mock_render_spec(&e.prompt.object_prompt, &in_crop, seed);
    let (w, h) = src.dims();
    let mut ellipse_pixels = 0u64;
    for y in 0..h {
        for x in 0..w {
            let inside_crop = crop.contains_point(x, y);
            let in_ellipse = inside_crop && spec.contains(x - crop.x0, y - crop.y0);
            ellipse_pixels += in_ellipse as u64;
            let labelled = labels.get(x, y) == e.prompt.class_id;
            if labelled != in_ellipse {
                return Err(format!("{}: label mismatch at ({x}, {y})", e.source_image));
            }
            if !inside_crop && out_img.get(x, y) != src.get(x, y) {
                return Err(format!(
                    "{}: edit outside crop at ({x}, {y})",
                    e.source_image
                ));
            }
        }
    }
    if ellipse_pixels != e.object_pixels {
        return Err(format!(
            "object_pixels {} vs oracle {ellipse_pixels}",
            e.object_pixels
        ));
    }
    Ok(())
}

/// Pearson statistic and the critical value at significance `alpha`.
pub fn chi_square(observed: &[u64], expected: &[f64], alpha: f64) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let stat = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (observed.len() - 1) as f64;
    (stat, ChiSquared::new(df).unwrap().inverse_cdf(1.0 - alpha))
}

/// Valid mask covering the bottom half of a `w` x `h` image.
pub fn bottom_half(w: u32, h: u32) -> poc_core::BinaryMask {
    poc_core::BinaryMask::new(w, h, (0..w * h).map(|i| i / w >= h / 2).collect()).unwrap()
}
