//! Prompted object insertion for semantic-segmentation datasets, and the
//! pixel-level metrics used to evaluate anomaly segmentation on them.
//!
//! The insertion pipeline runs four stages per sample:
//!
//! 1. [`region`]: segment a valid area from a location prompt and sample a
//!    region inside it, plus the square crop around it.
//! 2. [`backend`]: inpaint the region with a prompted model.
//! 3. [`blend::annotate`]: segment the inserted object inside the crop and
//!    reject failed generations.
//! 4. [`blend::feather`] / [`blend::blend`]: feather the object mask with a
//!    Gaussian and blend the inpainted crop back into the original image.
//!
//! [`dataset`] orchestrates whole runs and [`metrics`] scores anomaly maps.

pub mod backend;
pub mod blend;
pub mod catalog;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod fixture;
pub mod labels;
pub mod metrics;
pub mod prompt;
pub mod provenance;
pub mod raster;
pub mod region;
pub mod seed;

pub use error::{Error, Result};
pub use raster::{BinaryMask, ImageBuffer, LabelMap, Region, SoftMask};
