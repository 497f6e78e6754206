//! Sampling patterns: low-resolution grid, edge-adaptive and uniform random
//! masks, their union, the two sampling ratios, and measurement extraction.

mod acquire;
mod measurements;

pub use acquire::{
    acquire, build_mar, build_random, build_trps, AcquisitionConfig, AdaptiveBudget, EdgeSource,
    Strategy, DEFAULT_EDGE_FRACTION,
};
pub use measurements::{MeasurementFormat, Measurements};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edge::BinaryMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskRole {
    LowRes,
    Adaptive,
    Random,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    pub map: BinaryMap,
    pub role: MaskRole,
}

impl SamplingMask {
    pub fn new(map: BinaryMap, role: MaskRole) -> Self {
        Self { map, role }
    }

    pub fn popcount(&self) -> usize {
        self.map.popcount()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.map.dims()
    }
}

/// The component patterns of one acquisition together with the realized
/// sensing ratio `eta1 = |s_m| / N` and adaptive ratio
/// `eta2 = 1 - |s_r| / |s_m|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBundle {
    pub s_l: SamplingMask,
    pub s_a: SamplingMask,
    pub s_r: SamplingMask,
    pub s_m: SamplingMask,
    pub eta1: f64,
    pub eta2: f64,
}

impl MaskBundle {
    /// Unions the components and computes both ratios.
    pub fn from_components(s_l: BinaryMap, s_a: BinaryMap, s_r: BinaryMap) -> Result<Self> {
        let s_m = s_l.union(&s_a)?.union(&s_r)?;
        let (eta1, eta2) = ratios(&s_m, &s_r)?;
        Ok(Self {
            s_l: SamplingMask::new(s_l, MaskRole::LowRes),
            s_a: SamplingMask::new(s_a, MaskRole::Adaptive),
            s_r: SamplingMask::new(s_r, MaskRole::Random),
            s_m: SamplingMask::new(s_m, MaskRole::Mixed),
            eta1,
            eta2,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.s_m.dims()
    }

    /// Re-derives the union and both ratios from the stored masks.
    pub fn verify(&self) -> Result<()> {
        let union = self.s_l.map.union(&self.s_a.map)?.union(&self.s_r.map)?;
        if union != self.s_m.map {
            return Err(Error::InvalidArgument("s_m is not the union of its components".into()));
        }
        let (eta1, eta2) = ratios(&self.s_m.map, &self.s_r.map)?;
        if eta1 != self.eta1 || eta2 != self.eta2 {
            return Err(Error::InvalidArgument(format!(
                "stored ratios ({}, {}) differ from masks ({eta1}, {eta2})",
                self.eta1, self.eta2
            )));
        }
        Ok(())
    }
}

/// Ones at `(i·factor, j·factor)`: the pixels a `factor`-decimated pre-scan
/// reads.
pub fn lowres_grid_mask(dims: (usize, usize), factor: usize) -> Result<SamplingMask> {
    if factor < 1 {
        return Err(Error::InvalidArgument("grid factor must be >= 1".into()));
    }
    let (w, h) = dims;
    let map = BinaryMap::from_fn(w, h, |r, c| r % factor == 0 && c % factor == 0);
    Ok(SamplingMask::new(map, MaskRole::LowRes))
}

/// Exactly `count` pixels drawn uniformly without replacement from the
/// positions not in `exclude`, seeded for reproducibility.
pub fn random_mask(
    dims: (usize, usize),
    count: usize,
    seed: u64,
    exclude: Option<&BinaryMap>,
) -> Result<SamplingMask> {
    let (w, h) = dims;
    if let Some(ex) = exclude {
        if ex.dims() != dims {
            return Err(Error::mismatch(dims, ex.dims()));
        }
    }
    let mut free: Vec<usize> = match exclude {
        Some(ex) => (0..w * h).filter(|&i| !ex.get_index(i)).collect(),
        None => (0..w * h).collect(),
    };
    if count > free.len() {
        return Err(Error::InfeasibleBudget(format!(
            "{count} random samples requested but only {} positions are free",
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = free.partial_shuffle(&mut rng, count);
    let map = BinaryMap::from_indices(w, h, chosen.iter().copied());
    Ok(SamplingMask::new(map, MaskRole::Random))
}

/// Elementwise maximum of equally sized masks.
pub fn union_masks(masks: &[&SamplingMask]) -> Result<SamplingMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::InvalidArgument("union of zero masks".into()))?;
    let mut acc = first.map.clone();
    for m in &masks[1..] {
        acc = acc.union(&m.map)?;
    }
    Ok(SamplingMask::new(acc, MaskRole::Mixed))
}

/// `(eta1, eta2)` for a mixed pattern and its random component.
pub fn ratios(s_m: &BinaryMap, s_r: &BinaryMap) -> Result<(f64, f64)> {
    if !s_r.is_subset_of(s_m) {
        return Err(Error::InvalidArgument(
            "random component is not contained in the mixed mask".into(),
        ));
    }
    let m = s_m.popcount();
    if m == 0 {
        return Err(Error::InvalidArgument("mixed mask is empty".into()));
    }
    let eta1 = m as f64 / s_m.len() as f64;
    let eta2 = 1.0 - s_r.popcount() as f64 / m as f64;
    Ok((eta1, eta2))
}

/// Reads `f` at the mask support in row-major order.
pub fn apply_mask(f: &GrayImage, mask: &SamplingMask) -> Result<Measurements> {
    if f.dims() != mask.dims() {
        return Err(Error::mismatch(f.dims(), mask.dims()));
    }
    let w = f.width();
    let positions: Vec<_> = mask.map.ones().map(|i| (i / w, i % w)).collect();
    let values = mask.map.ones().map(|i| f.pixels()[i]).collect();
    Measurements::new(f.dims(), positions, values)
}

/// Derives a stage-specific seed so sub-draws of one acquisition stay
/// independent.
pub(crate) fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}
