//! Shared inputs for the pipeline benchmarks in `benches/`.

use marsense::harness::ImageSource;
use marsense::mask::random_mask;
use marsense::{apply_mask, GrayImage, Measurements};

pub fn phantom(size: usize) -> GrayImage {
    ImageSource::Phantom { size }.load().expect("phantom size is valid")
}

/// Uniform random samples of the phantom at sensing ratio `eta1`.
pub fn random_measurements(size: usize, eta1: f64, seed: u64) -> Measurements {
    let count = (eta1 * (size * size) as f64).round() as usize;
    let mask = random_mask((size, size), count, seed, None).expect("count fits");
    apply_mask(&phantom(size), &mask).expect("same dims")
}
