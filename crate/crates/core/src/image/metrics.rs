use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// Reported PSNR for identical images (and the ceiling for all others).
pub const PSNR_CAP_DB: f64 = 100.0;
/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;

const PEAK: f64 = 255.0;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsnrReport {
    pub mse: f64,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Mean squared error and PSNR against an 8-bit peak, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<PsnrReport> {
    reference.check_same_dims(test)?;
    let sse: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mse = sse / reference.len() as f64;
    let psnr_db = if mse > 0.0 {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
    } else {
        PSNR_CAP_DB
    };
    Ok(PsnrReport { mse, psnr_db })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable Gaussian filter over the positions where the whole window fits.
fn filter_valid(data: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width + 1 - SSIM_WINDOW;
    let oh = height + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * height];
    for r in 0..height {
        let line = &data[r * width..(r + 1) * width];
        for c in 0..ow {
            rows[r * ow + c] = w.iter().zip(&line[c..c + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * rows[(r + k) * ow + c])
                .sum();
        }
    }
    out
}

/// Mean single-scale SSIM with an 11×11 Gaussian window (σ = 1.5),
/// K1 = 0.01, K2 = 0.03 and dynamic range 255, averaged over all window
/// positions that lie fully inside the image.
pub fn ssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.check_same_dims(test)?;
    let (width, height) = reference.dims();
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {width}x{height}"
        )));
    }
    let w = gaussian_window();
    let x = reference.pixels();
    let y = test.pixels();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, width, height, &w);
    let mu_y = filter_valid(y, width, height, &w);
    let e_xx = filter_valid(&xx, width, height, &w);
    let e_yy = filter_valid(&yy, width, height, &w);
    let e_xy = filter_valid(&xy, width, height, &w);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok((total / mu_x.len() as f64).clamp(-1.0, 1.0))
}

pub fn quality(reference: &GrayImage, test: &GrayImage) -> Result<QualityReport> {
    let p = psnr(reference, test)?;
    Ok(QualityReport {
        mse: p.mse,
        psnr_db: p.psnr_db,
        ssim: ssim(reference, test)?,
    })
}
