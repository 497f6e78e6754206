//! Standard compressive sensing baseline: dense Gaussian projections of the
//! whole image, an orthonormal Haar sparsity basis, and orthogonal matching
//! pursuit.

mod haar;
mod omp;

pub use haar::{haar2_forward, haar2_inverse, SparseCoefficients};
pub use omp::{omp, OmpConfig, OmpResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of iid `N(0, 1/rows)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSensingMatrix {
    rows: usize,
    cols: usize,
    seed: u64,
    data: Vec<f64>,
}

impl DenseSensingMatrix {
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows == 0 || rows > cols {
            return Err(Error::InvalidArgument(format!(
                "sensing matrix needs 0 < rows <= cols, got {rows}x{cols}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self { rows, cols, seed, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// `y = Φ x`.
pub fn gaussian_measure(x: &[f64], phi: &DenseSensingMatrix) -> Result<Vec<f64>> {
    if x.len() != phi.cols {
        return Err(Error::InvalidArgument(format!(
            "signal of length {} for a matrix with {} columns",
            x.len(),
            phi.cols
        )));
    }
    Ok((0..phi.rows)
        .map(|r| phi.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}
