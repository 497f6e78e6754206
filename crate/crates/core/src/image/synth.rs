use super::GrayImage;
use crate::error::{Error, Result};

const MIN_SIDE: usize = 16;

/// Modified Shepp–Logan ellipses (Toft): intensity, semi-axes a/b,
/// centre x/y in [-1, 1]², rotation in degrees.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
];

fn check_side(n: usize) -> Result<()> {
    if n < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "generated images need side >= {MIN_SIDE}, got {n}"
        )));
    }
    Ok(())
}

/// `n×n` modified Shepp–Logan phantom, min/max rescaled to `[0, 255]` and
/// rounded to integer levels. Row 0 is the top of the head.
pub fn shepp_logan(n: usize) -> Result<GrayImage> {
    check_side(n)?;
    let half = (n as f64 - 1.0) / 2.0;
    let raw = GrayImage::from_fn(n, n, |row, col| {
        let x = (col as f64 - half) / half;
        let y = (half - row as f64) / half;
        SHEPP_LOGAN
            .iter()
            .filter(|e| {
                let (sin, cos) = e[5].to_radians().sin_cos();
                let (dx, dy) = (x - e[3], y - e[4]);
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
            })
            .map(|e| e[0])
            .sum()
    });
    let (lo, hi) = raw.min_max();
    Ok(raw.map(|v| ((v - lo) / (hi - lo) * 255.0).round()))
}

/// `n×n` bright disk of radius `n/4` centred on the image centre.
pub fn ball_image(n: usize) -> Result<GrayImage> {
    check_side(n)?;
    let centre = (n as f64 - 1.0) / 2.0;
    let r2 = (n as f64 / 4.0).powi(2);
    Ok(GrayImage::from_fn(n, n, |row, col| {
        let d2 = (row as f64 - centre).powi(2) + (col as f64 - centre).powi(2);
        if d2 <= r2 {
            255.0
        } else {
            0.0
        }
    }))
}
