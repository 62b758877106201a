//! Regenerates the wire-protocol fixtures used by the conformance tests:
//!
//!     cargo run -p poc-core --example wire_golden -- crates/core/tests/fixtures/wire

use std::path::PathBuf;

use poc_core::backend::http::{
    encode_inpaint_request, encode_inpaint_response, encode_segment_request,
    encode_segment_response,
};
use poc_core::backend::mock::{MockInpainter, MockSegmenter};
use poc_core::backend::{InpaintBackend, SegmentBackend};
use poc_core::fixture::{wire_inpaint_request, wire_segment_request};

fn main() -> poc_core::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "wire".into()));
    std::fs::create_dir_all(&dir)?;
    let inpaint = wire_inpaint_request()?;
    let edited = MockInpainter.inpaint(&inpaint)?;
    let segment = wire_segment_request(edited.clone());
    let detections = MockSegmenter::default().segment(&segment)?;

    std::fs::write(
        dir.join("inpaint_request.json"),
        encode_inpaint_request(&inpaint)?,
    )?;
    std::fs::write(dir.join("inpaint.json"), encode_inpaint_response(&edited)?)?;
    std::fs::write(
        dir.join("segment_request.json"),
        encode_segment_request(&segment)?,
    )?;
    std::fs::write(
        dir.join("segment.json"),
        encode_segment_response(&detections)?,
    )?;
    println!("wrote wire fixtures to {}", dir.display());
    Ok(())
}
