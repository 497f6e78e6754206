use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_mask, lowres_grid_mask, random_mask, stage_seed, MaskBundle};
use crate::edge::{dilate, predict_image, sobel_magnitude, BinaryMap, EdgeRanking, MorphOp, StructuringElement};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::tv::{recover, InitMode, TvConfig};

/// Edge pixels kept per image pixel when no budget is given.
pub const DEFAULT_EDGE_FRACTION: f64 = 0.0175;

const STAGE_RANDOM: u64 = 1;
const STAGE_FIRST: u64 = 2;
const STAGE_RING: u64 = 3;
const STAGE_SHORTFALL: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    #[default]
    Mar,
    Trps,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Mar => "mar",
            Strategy::Trps => "trps",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "mar" => Ok(Strategy::Mar),
            "trps" => Ok(Strategy::Trps),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How much of the budget goes to the edge-adaptive component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveBudget {
    /// Number of thresholded edge pixels before morphology.
    EdgePixels(usize),
    /// Thresholded edge pixels as a fraction of the image size.
    EdgeFraction(f64),
    /// Target share of the mixed mask not drawn at random.
    Eta2(f64),
}

impl Default for AdaptiveBudget {
    fn default() -> Self {
        AdaptiveBudget::EdgeFraction(DEFAULT_EDGE_FRACTION)
    }
}

/// Where the edge map of a MAR acquisition comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSource {
    /// Sobel of the upsampled low-resolution pre-scan.
    #[default]
    Predicted,
    /// Sobel of the full image. Reads every pixel, so it is an oracle for
    /// experiments, not a realizable acquisition.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    pub target_eta1: f64,
    pub adaptive: AdaptiveBudget,
    pub downsample_factor: usize,
    pub morph: MorphOp,
    /// Half-width of the square structuring element.
    pub morph_radius: usize,
    pub edge_source: EdgeSource,
    pub seed: u64,
    /// Share of the budget drawn at random in the first TRPS stage.
    /// Defaults to `1 - eta2` when the adaptive budget is an η₂ target.
    pub trps_first_stage_fraction: Option<f64>,
    /// Iterations of the TV recovery that predicts TRPS edges.
    pub trps_prescan_iters: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Mar,
            target_eta1: 0.3,
            adaptive: AdaptiveBudget::default(),
            downsample_factor: 4,
            morph: MorphOp::Dilate,
            morph_radius: 1,
            edge_source: EdgeSource::Predicted,
            seed: 0,
            trps_first_stage_fraction: None,
            trps_prescan_iters: 30,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(format!("acquisition config: {what}")));
        if !(self.target_eta1 > 0.0 && self.target_eta1 <= 1.0) {
            return bad(format!("eta1 {} outside (0, 1]", self.target_eta1));
        }
        if self.downsample_factor < 1 {
            return bad("downsample factor must be >= 1".into());
        }
        match self.adaptive {
            AdaptiveBudget::EdgeFraction(p) if !(0.0..=1.0).contains(&p) => {
                return bad(format!("edge fraction {p} outside [0, 1]"))
            }
            AdaptiveBudget::Eta2(e) if !(0.0..1.0).contains(&e) => {
                return bad(format!("eta2 {e} outside [0, 1)"))
            }
            _ => {}
        }
        if let Some(frac) = self.trps_first_stage_fraction {
            if !(frac > 0.0 && frac <= 1.0) {
                return bad(format!("first-stage fraction {frac} outside (0, 1]"));
            }
        }
        if self.strategy == Strategy::Trps && self.trps_prescan_iters < 1 {
            return bad("prescan iterations must be >= 1".into());
        }
        Ok(())
    }

    pub fn structuring_element(&self) -> StructuringElement {
        StructuringElement::square(self.morph_radius)
    }

    /// Total number of samples `round(eta1 · N)`.
    pub fn total_budget(&self, dims: (usize, usize)) -> usize {
        (self.target_eta1 * (dims.0 * dims.1) as f64).round() as usize
    }
}

/// Builds the acquisition selected by `cfg.strategy`.
pub fn acquire(f: &GrayImage, cfg: &AcquisitionConfig) -> Result<MaskBundle> {
    match cfg.strategy {
        Strategy::Random => build_random(f, cfg),
        Strategy::Mar => build_mar(f, cfg),
        Strategy::Trps => build_trps(f, cfg),
    }
}

fn budget(dims: (usize, usize), cfg: &AcquisitionConfig) -> Result<usize> {
    cfg.validate()?;
    let m = cfg.total_budget(dims);
    if m == 0 {
        return Err(Error::InfeasibleBudget(format!(
            "eta1 {} rounds to zero samples on {}x{}",
            cfg.target_eta1, dims.0, dims.1
        )));
    }
    Ok(m)
}

/// `round(eta1 · N)` pixels uniformly at random.
pub fn build_random(f: &GrayImage, cfg: &AcquisitionConfig) -> Result<MaskBundle> {
    let dims = f.dims();
    let m = budget(dims, cfg)?;
    let s_r = random_mask(dims, m, stage_seed(cfg.seed, STAGE_RANDOM), None)?;
    let empty = BinaryMap::empty(dims.0, dims.1);
    MaskBundle::from_components(empty.clone(), empty, s_r.map)
}

/// Low-resolution grid, then edges predicted from it, then uniform random
/// samples for whatever budget is left.
///
/// With [`EdgeSource::Predicted`] the image is read only at the grid.
pub fn build_mar(f: &GrayImage, cfg: &AcquisitionConfig) -> Result<MaskBundle> {
    let dims = f.dims();
    let (w, h) = dims;
    let m = budget(dims, cfg)?;
    let factor = cfg.downsample_factor;
    let s_l = lowres_grid_mask(dims, factor)?.map;
    let n_l = s_l.popcount();
    if n_l > m {
        return Err(Error::InfeasibleBudget(format!(
            "low-resolution grid needs {n_l} samples but eta1 {} allows {m}",
            cfg.target_eta1
        )));
    }

    let magnitude = match cfg.edge_source {
        EdgeSource::Predicted => {
            let prescan = apply_mask(f, &super::SamplingMask::new(s_l.clone(), super::MaskRole::LowRes))?;
            let (lw, lh) = (w.div_ceil(factor), h.div_ceil(factor));
            let low = GrayImage::new(lw, lh, prescan.values().to_vec())?;
            sobel_magnitude(&predict_image(&low, factor, dims)?)?
        }
        EdgeSource::GroundTruth => sobel_magnitude(f)?,
    };
    let ranking = EdgeRanking::new(&magnitude);
    let se = cfg.structuring_element();

    let (target, exact) = match cfg.adaptive {
        AdaptiveBudget::Eta2(e) => {
            let adaptive_total = m - ((1.0 - e) * m as f64).round() as usize;
            if adaptive_total < n_l {
                return Err(Error::InfeasibleBudget(format!(
                    "eta2 {e} leaves {adaptive_total} adaptive samples, fewer than the {n_l} grid samples"
                )));
            }
            (adaptive_total, true)
        }
        AdaptiveBudget::EdgePixels(k) => (edge_demand(&ranking, &s_l, cfg.morph, &se, k, m), false),
        AdaptiveBudget::EdgeFraction(p) => {
            let k = (p * (w * h) as f64).round() as usize;
            (edge_demand(&ranking, &s_l, cfg.morph, &se, k, m), false)
        }
    };
    let s_a = fill_adaptive(&ranking, &s_l, cfg.morph, &se, target, exact, cfg.seed)?;
    let covered = s_l.union(&s_a)?;
    let s_r = random_mask(dims, m - covered.popcount(), stage_seed(cfg.seed, STAGE_RANDOM), Some(&covered))?;
    MaskBundle::from_components(s_l, s_a, s_r.map)
}

/// `|S_l ∪ morph(top_k)|`, capped at the total budget.
fn edge_demand(
    ranking: &EdgeRanking,
    base: &BinaryMap,
    morph: MorphOp,
    se: &StructuringElement,
    k: usize,
    total: usize,
) -> usize {
    let k = k.min(ranking.nonzero());
    let covered = base.union(&morph.apply(&ranking.top(k), se)).expect("same dims");
    covered.popcount().min(total)
}

/// Two-stage acquisition: a random first stage, edges predicted from a
/// short TV recovery of it, and adaptive samples along those edges.
pub fn build_trps(f: &GrayImage, cfg: &AcquisitionConfig) -> Result<MaskBundle> {
    let dims = f.dims();
    let m = budget(dims, cfg)?;
    let frac = match (cfg.trps_first_stage_fraction, cfg.adaptive) {
        (Some(frac), _) => frac,
        (None, AdaptiveBudget::Eta2(e)) => 1.0 - e,
        (None, _) => {
            return Err(Error::InvalidArgument(
                "TRPS needs a first-stage fraction or an eta2 target".into(),
            ))
        }
    };
    let first = ((frac * m as f64).round() as usize).clamp(1, m);
    let stage1 = random_mask(dims, first, stage_seed(cfg.seed, STAGE_FIRST), None)?;
    let empty = BinaryMap::empty(dims.0, dims.1);
    if first == m {
        return MaskBundle::from_components(empty.clone(), empty, stage1.map);
    }

    let prescan_cfg = TvConfig {
        max_iters: cfg.trps_prescan_iters,
        ..TvConfig::default()
    };
    let predicted = recover(&apply_mask(f, &stage1)?, &prescan_cfg, InitMode::MeanFill)?.image;
    let ranking = EdgeRanking::new(&sobel_magnitude(&predicted)?);
    let se = cfg.structuring_element();
    let s_a = fill_adaptive(&ranking, &stage1.map, cfg.morph, &se, m, true, cfg.seed)?;

    let covered = stage1.map.union(&s_a)?;
    let shortfall = m - covered.popcount();
    let extra = random_mask(dims, shortfall, stage_seed(cfg.seed, STAGE_SHORTFALL), Some(&covered))?;
    let s_r = stage1.map.union(&extra.map)?;
    // the adaptive part excludes the first-stage pixels it overlaps
    let s_a = s_a.difference(&s_r)?;
    MaskBundle::from_components(empty, s_a, s_r)
}

/// Adaptive component grown from the strongest edges so that
/// `|base ∪ S_a|` does not exceed `target`.
///
/// The largest `k` with `|base ∪ morph(top_k)| ≤ target` is found first. In
/// exact mode the remainder is then taken from the next edge pixel's
/// neighbourhood or, once every edge pixel is used, from successive
/// dilation rings, with the final partial set drawn at random. Stops short
/// of `target` only when no ring can grow.
fn fill_adaptive(
    ranking: &EdgeRanking,
    base: &BinaryMap,
    morph: MorphOp,
    se: &StructuringElement,
    target: usize,
    exact: bool,
    seed: u64,
) -> Result<BinaryMap> {
    let covered_by = |k: usize| -> (BinaryMap, usize) {
        let s_a = morph.apply(&ranking.top(k), se);
        let n = base.union(&s_a).expect("same dims").popcount();
        (s_a, n)
    };
    let nnz = ranking.nonzero();
    let (mut lo, mut hi) = (0usize, nnz);
    if covered_by(nnz).1 <= target {
        lo = nnz;
    } else {
        // invariant: covered(lo) <= target < covered(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if covered_by(mid).1 <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let (mut s_a, mut count) = covered_by(lo);
    if !exact {
        return Ok(s_a);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, STAGE_RING));
    let mut grow_from_edges = lo < nnz;
    while count < target {
        let covered = base.union(&s_a)?;
        let candidates = if grow_from_edges {
            grow_from_edges = false;
            morph.apply(&ranking.top(lo + 1), se).difference(&covered)?
        } else {
            dilate(&s_a, se).difference(&covered)?
        };
        let mut ring: Vec<usize> = candidates.ones().collect();
        if ring.is_empty() {
            break;
        }
        let need = target - count;
        if ring.len() > need {
            let (chosen, _) = ring.partial_shuffle(&mut rng, need);
            chosen.sort_unstable();
            ring = chosen.to_vec();
        }
        count += ring.len();
        for i in ring {
            s_a.set_index(i, true);
        }
    }
    Ok(s_a)
}
