use super::haar::{haar_forward_in_place, haar_inverse_in_place, SparseCoefficients};
use super::DenseSensingMatrix;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Relative pivot below which a new atom is treated as linearly dependent
/// on the active set.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    pub max_sparsity: usize,
    /// Stop once `‖r‖ ≤ residual_tol · ‖y‖`.
    pub residual_tol: f64,
}

#[derive(Debug, Clone)]
pub struct OmpResult {
    pub coefficients: SparseCoefficients,
    /// Inverse transform of the coefficients, not clamped.
    pub image: GrayImage,
    /// Atoms in the order they were selected.
    pub support: Vec<usize>,
    /// `‖r‖` before the first and after every accepted atom.
    pub residual_norms: Vec<f64>,
    /// Atoms rejected because they were dependent on the active set.
    pub skipped: Vec<usize>,
}

impl OmpResult {
    pub fn iterations(&self) -> usize {
        self.support.len()
    }
}

/// Column-major `m × N` dictionary `Φ · H⁻¹`; row `r` is the Haar transform
/// of row `r` of `Φ` because `H` is orthonormal.
struct Dictionary {
    m: usize,
    columns: Vec<f64>,
    norms: Vec<f64>,
}

impl Dictionary {
    fn new(phi: &DenseSensingMatrix, dims: (usize, usize)) -> Self {
        let (m, n) = (phi.rows(), phi.cols());
        let mut columns = vec![0.0; m * n];
        let mut row = vec![0.0; n];
        for r in 0..m {
            row.copy_from_slice(phi.row(r));
            haar_forward_in_place(&mut row, dims.0, dims.1);
            for (j, v) in row.iter().enumerate() {
                columns[j * m + r] = *v;
            }
        }
        let norms = columns.chunks(m).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        Self { m, columns, norms }
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.m..(j + 1) * self.m]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `L z = b` for lower-triangular `L` stored by rows.
fn forward_sub(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    z
}

/// Solves `Lᵀ x = z`.
fn backward_sub(l: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    x
}

/// Orthogonal matching pursuit over the Haar coefficients of a `dims`
/// image measured as `y = Φ x`.
///
/// Each step picks the atom most correlated with the residual (after
/// normalizing columns) and refits all active coefficients by least squares,
/// using a Cholesky factor of the active Gram matrix that grows by one row
/// per step.
pub fn omp(y: &[f64], phi: &DenseSensingMatrix, dims: (usize, usize), cfg: &OmpConfig) -> Result<OmpResult> {
    let (w, h) = dims;
    let n = w * h;
    if phi.cols() != n {
        return Err(Error::InvalidArgument(format!(
            "{}-column matrix for a {w}x{h} image",
            phi.cols()
        )));
    }
    if y.len() != phi.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} measurements for a {}-row matrix",
            y.len(),
            phi.rows()
        )));
    }
    if cfg.max_sparsity > phi.rows() {
        return Err(Error::InvalidArgument(format!(
            "sparsity {} exceeds the {} measurements",
            cfg.max_sparsity,
            phi.rows()
        )));
    }
    SparseCoefficients::zeros(w, h)?;

    let dict = Dictionary::new(phi, dims);
    let y_norm = dot(y, y).sqrt();
    let stop = cfg.residual_tol * y_norm;
    let mut residual = y.to_vec();
    let mut residual_norms = vec![y_norm];
    let mut support: Vec<usize> = Vec::new();
    let mut skipped = Vec::new();
    let mut excluded = vec![false; n];
    let mut l: Vec<Vec<f64>> = Vec::new();
    let mut aty: Vec<f64> = Vec::new();
    let mut x: Vec<f64> = Vec::new();

    while support.len() < cfg.max_sparsity && *residual_norms.last().unwrap() > stop {
        let best = (0..n)
            .filter(|&j| !excluded[j] && dict.norms[j] > 0.0)
            .map(|j| (j, dot(dict.column(j), &residual).abs() / dict.norms[j]))
            .fold(None, |acc: Option<(usize, f64)>, (j, c)| match acc {
                Some((_, best)) if best >= c => acc,
                _ => Some((j, c)),
            });
        let Some((j, corr)) = best else { break };
        if corr == 0.0 {
            break;
        }
        excluded[j] = true;

        let col = dict.column(j);
        let cross: Vec<f64> = support.iter().map(|&s| dot(dict.column(s), col)).collect();
        let wvec = forward_sub(&l, &cross);
        let pivot_sq = dict.norms[j].powi(2) - dot(&wvec, &wvec);
        if pivot_sq <= PIVOT_TOL * dict.norms[j].powi(2) {
            skipped.push(j);
            continue;
        }
        let mut new_row = wvec;
        new_row.push(pivot_sq.sqrt());
        l.push(new_row);
        support.push(j);
        aty.push(dot(col, y));
        x = backward_sub(&l, &forward_sub(&l, &aty));

        residual.copy_from_slice(y);
        for (&s, &coef) in support.iter().zip(&x) {
            for (r, a) in residual.iter_mut().zip(dict.column(s)) {
                *r -= coef * a;
            }
        }
        let norm = dot(&residual, &residual).sqrt();
        if !norm.is_finite() {
            return Err(Error::Numerical("OMP residual became non-finite".into()));
        }
        residual_norms.push(norm);
    }

    let mut values = vec![0.0; n];
    for (&s, &coef) in support.iter().zip(&x) {
        values[s] = coef;
    }
    let mut pixels = values.clone();
    haar_inverse_in_place(&mut pixels, w, h);
    Ok(OmpResult {
        coefficients: SparseCoefficients::new(w, h, values)?,
        image: GrayImage::new(w, h, pixels)?,
        support,
        residual_norms,
        skipped,
    })
}
