//! Mixed adaptive-random (MAR) sampling for partial image acquisition.
//!
//! A low-resolution pre-scan predicts where the edges are, a budget of
//! samples is spent along them, the rest is drawn uniformly at random, and
//! the image is recovered by total-variation minimization. A dense Gaussian
//! compressive-sensing baseline and an experiment harness are included.

pub mod cs;
pub mod edge;
mod error;
pub mod harness;
pub mod image;
pub mod mask;
pub mod tv;

pub use edge::{BinaryMap, MorphOp, StructuringElement};
pub use error::{Error, Result};
pub use image::{psnr, quality, ssim, GrayImage};
pub use mask::{
    acquire, apply_mask, AcquisitionConfig, AdaptiveBudget, EdgeSource, MaskBundle, Measurements, SamplingMask,
    Strategy,
};
pub use tv::{recover, InitMode, RecoveryResult, TvConfig};
