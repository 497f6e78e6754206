//! Grayscale image grid, raster I/O, synthetic test images and quality metrics.

mod io;
mod metrics;
mod synth;

pub use io::{load_image, save_image};
pub use metrics::{psnr, quality, ssim, PsnrReport, QualityReport, PSNR_CAP_DB, SSIM_WINDOW};
pub use synth::{ball_image, shepp_logan};

pub(crate) use io::parse_pnm_header;

use crate::error::{Error, Result};

/// Row-major grid of real intensities.
///
/// Images loaded from disk or produced by the generators live in `[0, 255]`.
/// Intermediate grids (gradient magnitudes, unclamped iterates, objective
/// gradients) reuse this type and may leave that range; only finiteness is
/// enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} intensities for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite intensity {} at index {i}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant image. Panics on zero dimensions or a non-finite value.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant image")
    }

    /// Builds an image from `f(row, col)`. Panics on zero dimensions or
    /// non-finite output.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data).expect("valid generated image")
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Panics if `value` is not finite.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite(), "non-finite intensity");
        self.data[row * self.width + col] = value;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    /// Left-right mirror.
    pub fn mirror_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |r, c| self.get(r, self.width - 1 - c))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
            .expect("map produced non-finite intensity")
    }

    pub fn clamped(&self) -> Self {
        self.map(|v| v.clamp(0.0, 255.0))
    }

    /// Rounds to the nearest integer and clamps to `[0, 255]`, i.e. what an
    /// 8-bit raster stores.
    pub fn quantized(&self) -> Self {
        self.map(quantize)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn check_same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0)
}

/// Keeps every `factor`-th pixel in both directions starting at `(0, 0)`.
///
/// No averaging: each output pixel is an actual pixel of the input, which is
/// what lets the low-resolution grid double as part of the final sampling
/// mask. Output dims are `ceil(dims / factor)`.
pub fn downsample_decimate(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor < 1 {
        return Err(Error::InvalidArgument("decimation factor must be >= 1".into()));
    }
    let w = img.width.div_ceil(factor);
    let h = img.height.div_ceil(factor);
    Ok(GrayImage::from_fn(w, h, |r, c| img.get(r * factor, c * factor)))
}
