use super::BinaryMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Gradient magnitude `sqrt(Gx² + Gy²)` with the 3×3 Sobel kernels and
/// replicated borders.
pub fn sobel_magnitude(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall(format!("sobel needs 3x3, got {w}x{h}")));
    }
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        img.get(r, c)
    };
    Ok(GrayImage::from_fn(w, h, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
        let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
            - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
        gx.hypot(gy)
    }))
}

/// Pixels with positive magnitude, strongest first; equal magnitudes keep
/// row-major order. Prefixes of this order are the top-k edge sets, so one
/// ranking serves every budget.
#[derive(Debug, Clone)]
pub struct EdgeRanking {
    width: usize,
    height: usize,
    order: Vec<usize>,
}

impl EdgeRanking {
    pub fn new(magnitude: &GrayImage) -> Self {
        let mags = magnitude.pixels();
        let mut order: Vec<usize> = (0..mags.len()).filter(|&i| mags[i] > 0.0).collect();
        // stable sort keeps ascending index among ties
        order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
        Self {
            width: magnitude.width(),
            height: magnitude.height(),
            order,
        }
    }

    /// Number of pixels with nonzero magnitude.
    pub fn nonzero(&self) -> usize {
        self.order.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The `min(k, nonzero)` strongest pixels.
    pub fn top(&self, k: usize) -> BinaryMap {
        BinaryMap::from_indices(self.width, self.height, self.order[..k.min(self.order.len())].iter().copied())
    }
}

/// Marks the `k` largest magnitudes, ties broken by ascending row-major
/// index. Zero-magnitude pixels are never selected, so a flat magnitude
/// image gives an empty map whatever the budget.
pub fn threshold_top_k(magnitude: &GrayImage, k: usize) -> Result<BinaryMap> {
    if k > magnitude.len() {
        return Err(Error::InvalidArgument(format!(
            "edge budget {k} exceeds {} pixels",
            magnitude.len()
        )));
    }
    Ok(EdgeRanking::new(magnitude).top(k))
}

const KEYS_A: f64 = -0.5;

fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Pads a line with one sample before and two after using the cubic
/// end conditions `c[-1] = 3c[0] - 3c[1] + c[2]`, which keep quadratics
/// exact up to the border.
fn extend_line(line: &[f64]) -> Vec<f64> {
    let n = line.len();
    let mut ext = Vec::with_capacity(n + 3);
    ext.push(3.0 * line[0] - 3.0 * line[1] + line[2]);
    ext.extend_from_slice(line);
    let after = 3.0 * line[n - 1] - 3.0 * line[n - 2] + line[n - 3];
    ext.push(after);
    ext.push(3.0 * after - 3.0 * line[n - 1] + line[n - 2]);
    ext
}

/// Tap weights for output coordinate `x` at integer `factor`: source base
/// index (into the extended line) and four weights.
fn taps(x: usize, factor: usize) -> (usize, [f64; 4]) {
    let k = x / factor;
    let t = (x % factor) as f64 / factor as f64;
    (
        k,
        [
            keys_kernel(1.0 + t),
            keys_kernel(t),
            keys_kernel(1.0 - t),
            keys_kernel(2.0 - t),
        ],
    )
}

fn resample_line(ext: &[f64], out_len: usize, factor: usize) -> impl Iterator<Item = f64> + '_ {
    (0..out_len).map(move |x| {
        let (k, w) = taps(x, factor);
        w.iter().zip(&ext[k..k + 4]).map(|(a, b)| a * b).sum()
    })
}

/// Keys cubic convolution (a = -0.5) upsampling by an integer factor.
///
/// Output pixel `x` samples the source at `x / factor`, so positions
/// `(i·factor, j·factor)` reproduce `low(i, j)` exactly. Values are clamped
/// to `[0, 255]` after interpolation.
pub fn bicubic_upsample(low: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor < 1 {
        return Err(Error::InvalidArgument("upsampling factor must be >= 1".into()));
    }
    let (w, h) = low.dims();
    if w < 4 || h < 4 {
        return Err(Error::TooSmall(format!("bicubic needs 4x4 support, got {w}x{h}")));
    }
    let (ow, oh) = (w * factor, h * factor);
    let mut horiz = Vec::with_capacity(ow * h);
    for r in 0..h {
        let ext = extend_line(&low.pixels()[r * w..(r + 1) * w]);
        horiz.extend(resample_line(&ext, ow, factor));
    }
    let mut out = vec![0.0; ow * oh];
    let mut column = vec![0.0; h];
    for c in 0..ow {
        for (r, v) in column.iter_mut().enumerate() {
            *v = horiz[r * ow + c];
        }
        let ext = extend_line(&column);
        for (r, v) in resample_line(&ext, oh, factor).enumerate() {
            out[r * ow + c] = v.clamp(0.0, 255.0);
        }
    }
    GrayImage::new(ow, oh, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::downsample_decimate;
    use proptest::prelude::*;

    #[test]
    fn sobel_constant_is_zero() {
        let m = sobel_magnitude(&GrayImage::filled(6, 5, 77.0)).unwrap();
        assert!(m.pixels().iter().all(|&v| v == 0.0));
        assert!(sobel_magnitude(&GrayImage::filled(2, 5, 0.0)).is_err());
    }

    #[test]
    fn sobel_vertical_step() {
        // 3 rows × 5 columns, 0 0 0 | 255 255
        let img = GrayImage::from_fn(5, 3, |_, c| if c >= 3 { 255.0 } else { 0.0 });
        let m = sobel_magnitude(&img).unwrap();
        assert_eq!(m.get(1, 2), 1020.0);
        assert_eq!(m.get(1, 3), 1020.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn sobel_commutes_with_transpose() {
        let img = GrayImage::from_fn(7, 5, |r, c| ((r * 37 + c * 11) % 50) as f64);
        let a = sobel_magnitude(&img.transpose()).unwrap();
        let b = sobel_magnitude(&img).unwrap().transpose();
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_budgets() {
        let mags = GrayImage::from_fn(3, 3, |r, c| (r * 3 + c + 1) as f64);
        assert_eq!(threshold_top_k(&mags, 0).unwrap().popcount(), 0);
        assert_eq!(threshold_top_k(&mags, 9).unwrap(), BinaryMap::full(3, 3));
        assert_eq!(threshold_top_k(&mags, 2).unwrap(), BinaryMap::from_indices(3, 3, [7, 8]));
        assert!(threshold_top_k(&mags, 10).is_err());
    }

    #[test]
    fn threshold_ties_break_row_major() {
        let equal = GrayImage::filled(2, 2, 5.0);
        assert_eq!(threshold_top_k(&equal, 3).unwrap(), BinaryMap::from_indices(2, 2, [0, 1, 2]));
    }

    #[test]
    fn threshold_never_selects_zero_magnitude() {
        let flat = GrayImage::filled(4, 4, 0.0);
        assert_eq!(threshold_top_k(&flat, 16).unwrap().popcount(), 0);
        let mut one = flat.clone();
        one.set(2, 2, 3.0);
        assert_eq!(threshold_top_k(&one, 5).unwrap().popcount(), 1);
    }

    #[test]
    fn keys_kernel_interpolates() {
        assert_eq!(keys_kernel(0.0), 1.0);
        assert_eq!(keys_kernel(1.0), 0.0);
        assert_eq!(keys_kernel(2.0), 0.0);
        for i in 0..10 {
            let t = i as f64 / 10.0;
            let sum: f64 = taps(i, 10).1.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn bicubic_constant_and_guards() {
        let c = GrayImage::filled(5, 4, 42.0);
        let up = bicubic_upsample(&c, 3).unwrap();
        assert_eq!(up.dims(), (15, 12));
        assert!(up.pixels().iter().all(|v| (v - 42.0).abs() < 1e-9));
        assert!(bicubic_upsample(&GrayImage::filled(3, 8, 0.0), 2).is_err());
        assert!(bicubic_upsample(&c, 0).is_err());
    }

    #[test]
    fn bicubic_reproduces_ramps_everywhere() {
        // a + b·x + c·y evaluated at fine coordinates x/factor
        let low = GrayImage::from_fn(6, 5, |r, c| 20.0 + 9.0 * c as f64 + 13.0 * r as f64);
        let factor = 4;
        let up = bicubic_upsample(&low, factor).unwrap();
        for r in 0..up.height() {
            for c in 0..up.width() {
                let expect = 20.0 + 9.0 * c as f64 / factor as f64 + 13.0 * r as f64 / factor as f64;
                assert!((up.get(r, c) - expect).abs() < 1e-9, "({r},{c})");
            }
        }
    }

    proptest! {
        #[test]
        fn upsample_then_decimate_is_identity(
            w in 4usize..9, h in 4usize..9, factor in 1usize..5,
            vals in prop::collection::vec(0.0..255.0f64, 81),
        ) {
            let low = GrayImage::new(w, h, vals[..w * h].to_vec()).unwrap();
            let up = bicubic_upsample(&low, factor).unwrap();
            let back = downsample_decimate(&up, factor).unwrap();
            prop_assert_eq!(back.dims(), low.dims());
            for (a, b) in back.pixels().iter().zip(low.pixels()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
