use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Coefficients of the full orthonormal 2D Haar pyramid, stored in the
/// usual in-place layout: the approximation coefficient at `(0, 0)`, detail
/// bands of coarser levels nearer the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCoefficients {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SparseCoefficients {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {width}x{height}",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Indices of the nonzero coefficients, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0.0).collect()
    }

    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "Haar transform needs power-of-two dims, got {width}x{height}"
        )));
    }
    Ok(())
}

fn forward_line(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        tmp[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
        tmp[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

fn inverse_line(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (s, d) = (buf[i], buf[half + i]);
        tmp[2 * i] = (s + d) * std::f64::consts::FRAC_1_SQRT_2;
        tmp[2 * i + 1] = (s - d) * std::f64::consts::FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

/// Active block sizes, finest first. A side stops halving once it reaches 1.
fn levels(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut cw, mut ch) = (width, height);
    while cw > 1 || ch > 1 {
        out.push((cw, ch));
        cw = (cw / 2).max(1);
        ch = (ch / 2).max(1);
    }
    out
}

fn transform_rows(data: &mut [f64], width: usize, cw: usize, ch: usize, step: LineStep, tmp: &mut [f64]) {
    if cw > 1 {
        for r in 0..ch {
            step(&mut data[r * width..r * width + cw], &mut tmp[..cw]);
        }
    }
}

fn transform_cols(data: &mut [f64], width: usize, cw: usize, ch: usize, step: LineStep, tmp: &mut [f64]) {
    if ch > 1 {
        let mut line = vec![0.0; ch];
        for c in 0..cw {
            for r in 0..ch {
                line[r] = data[r * width + c];
            }
            step(&mut line, &mut tmp[..ch]);
            for r in 0..ch {
                data[r * width + c] = line[r];
            }
        }
    }
}

type LineStep = fn(&mut [f64], &mut [f64]);

/// In-place forward transform of a row-major `width × height` buffer.
pub(crate) fn haar_forward_in_place(data: &mut [f64], width: usize, height: usize) {
    let mut tmp = vec![0.0; width.max(height)];
    for (cw, ch) in levels(width, height) {
        transform_rows(data, width, cw, ch, forward_line, &mut tmp);
        transform_cols(data, width, cw, ch, forward_line, &mut tmp);
    }
}

pub(crate) fn haar_inverse_in_place(data: &mut [f64], width: usize, height: usize) {
    let mut tmp = vec![0.0; width.max(height)];
    for (cw, ch) in levels(width, height).into_iter().rev() {
        transform_cols(data, width, cw, ch, inverse_line, &mut tmp);
        transform_rows(data, width, cw, ch, inverse_line, &mut tmp);
    }
}

pub fn haar2_forward(img: &GrayImage) -> Result<SparseCoefficients> {
    let (w, h) = img.dims();
    check_dims(w, h)?;
    let mut data = img.pixels().to_vec();
    haar_forward_in_place(&mut data, w, h);
    SparseCoefficients::new(w, h, data)
}

/// Exact inverse of [`haar2_forward`]. The result is not clamped.
pub fn haar2_inverse(coeffs: &SparseCoefficients) -> Result<GrayImage> {
    let (w, h) = coeffs.dims();
    let mut data = coeffs.values.clone();
    haar_inverse_in_place(&mut data, w, h);
    GrayImage::new(w, h, data)
}
