//! 8-connected component labelling on binary masks.

use std::collections::VecDeque;

use crate::raster::BinaryMask;

/// Splits `mask` into its 8-connected components, ordered by the raster
/// position of each component's first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w as usize * h as usize];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..seen.len() {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        let mut component = BinaryMask::filled(w, h, false).expect("dims from valid mask");
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w as usize) as i64, (i / w as usize) as i64);
            component.set(x as u32, y as u32, true);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w as usize + nx as usize;
                    if !seen[j] && mask.bits()[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(component);
    }
    out
}
