use serde::{Deserialize, Serialize};

use super::BinaryMap;
use crate::error::{Error, Result};

/// Which morphological post-processing is applied to thresholded edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    None,
    #[default]
    Dilate,
    Close,
}

impl MorphOp {
    pub fn name(self) -> &'static str {
        match self {
            MorphOp::None => "none",
            MorphOp::Dilate => "dilate",
            MorphOp::Close => "close",
        }
    }

    pub fn apply(self, map: &BinaryMap, se: &StructuringElement) -> BinaryMap {
        match self {
            MorphOp::None => map.clone(),
            MorphOp::Dilate => dilate(map, se),
            MorphOp::Close => close(map, se),
        }
    }
}

impl std::str::FromStr for MorphOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(MorphOp::None),
            "dilate" => Ok(MorphOp::Dilate),
            "close" => Ok(MorphOp::Close),
            other => Err(Error::InvalidArgument(format!("unknown morphology {other:?}"))),
        }
    }
}

impl std::fmt::Display for MorphOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of `(drow, dcol)` offsets; always contains the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    pub fn new(mut offsets: Vec<(isize, isize)>) -> Result<Self> {
        if !offsets.contains(&(0, 0)) {
            return Err(Error::InvalidArgument(
                "structuring element must contain the origin".into(),
            ));
        }
        offsets.sort_unstable();
        offsets.dedup();
        Ok(Self { offsets })
    }

    /// Full `(2r+1)×(2r+1)` square.
    pub fn square(radius: usize) -> Self {
        let r = radius as isize;
        let offsets = (-r..=r).flat_map(|dr| (-r..=r).map(move |dc| (dr, dc))).collect();
        Self { offsets }
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    fn radius(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(r, c)| r.unsigned_abs().max(c.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square(1)
    }
}

fn dilate_raw(bits: &[u8], w: usize, h: usize, se: &StructuringElement) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b == 1) {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for &(dr, dc) in se.offsets() {
            let (rr, cc) = (r + dr, c + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                out[rr as usize * w + cc as usize] = 1;
            }
        }
    }
    out
}

fn erode_raw(bits: &[u8], w: usize, h: usize, se: &StructuringElement) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        let all = se.offsets().iter().all(|&(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w && bits[rr as usize * w + cc as usize] == 1
        });
        *o = all as u8;
    }
    out
}

/// Binary dilation; pixels outside the map count as 0.
pub fn dilate(map: &BinaryMap, se: &StructuringElement) -> BinaryMap {
    let (w, h) = map.dims();
    BinaryMap::new(w, h, dilate_raw(map.bits(), w, h, se)).expect("dilation keeps shape")
}

/// Binary erosion; pixels outside the map count as 0, so a full map loses
/// its border.
pub fn erode(map: &BinaryMap, se: &StructuringElement) -> BinaryMap {
    let (w, h) = map.dims();
    BinaryMap::new(w, h, erode_raw(map.bits(), w, h, se)).expect("erosion keeps shape")
}

/// Closing (dilation then erosion), evaluated on a canvas padded by the
/// element radius so the dilated set is never truncated at the border. The
/// result is the planar closing restricted to the map, which keeps closing
/// extensive and idempotent at the edges too.
pub fn close(map: &BinaryMap, se: &StructuringElement) -> BinaryMap {
    let (w, h) = map.dims();
    let pad = se.radius();
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let mut canvas = vec![0u8; pw * ph];
    for r in 0..h {
        canvas[(r + pad) * pw + pad..(r + pad) * pw + pad + w].copy_from_slice(&map.bits()[r * w..(r + 1) * w]);
    }
    let closed = erode_raw(&dilate_raw(&canvas, pw, ph, se), pw, ph, se);
    BinaryMap::from_fn(w, h, |r, c| closed[(r + pad) * pw + c + pad] == 1)
}
