//! Edge prediction from a low-resolution pre-scan: cubic upsampling, Sobel
//! magnitude, budgeted top-k thresholding and binary morphology.

mod binary;
mod filters;
mod morphology;

pub use binary::{BinaryMap, MapFormat};
pub use filters::{bicubic_upsample, sobel_magnitude, threshold_top_k, EdgeRanking};
pub use morphology::{close, dilate, erode, MorphOp, StructuringElement};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Upsamples the pre-scan by `factor` and crops to `dims` (the
/// high-resolution size, which may be smaller than `low × factor` when the
/// original did not divide evenly).
pub fn predict_image(low: &GrayImage, factor: usize, dims: (usize, usize)) -> Result<GrayImage> {
    let up = bicubic_upsample(low, factor)?;
    let (w, h) = dims;
    if w > up.width() || h > up.height() {
        return Err(Error::mismatch(dims, up.dims()));
    }
    if up.dims() == dims {
        return Ok(up);
    }
    Ok(GrayImage::from_fn(w, h, |r, c| up.get(r, c)))
}

/// `morph(threshold_top_k(sobel(bicubic(low)), budget))`.
///
/// The predicted adaptive pattern before it becomes a sampling mask. A flat
/// pre-scan has no edges and yields an empty map for any budget.
pub fn predict_edge_map(
    low: &GrayImage,
    factor: usize,
    morph: MorphOp,
    se: &StructuringElement,
    budget: usize,
) -> Result<BinaryMap> {
    let predicted = bicubic_upsample(low, factor)?;
    let raw = threshold_top_k(&sobel_magnitude(&predicted)?, budget)?;
    Ok(morph.apply(&raw, se))
}
