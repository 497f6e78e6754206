use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{parse_pnm_header, GrayImage};

/// Row-major 0/1 grid: edge maps, morphology outputs and sampling patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

/// On-disk encoding for binary maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapFormat {
    /// Packed netpbm bitmap (P4), 1 = set.
    #[default]
    Pbm,
    /// Binary PGM (P5) with 0 / 255.
    Pgm,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "map dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "bit {i} is {} (must be 0 or 1)",
                bits[i]
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// All-zero map. Panics on zero dimensions.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    /// All-one map. Panics on zero dimensions.
    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::empty(width, height);
        m.bits.fill(1);
        m
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for row in 0..height {
            for col in 0..width {
                m.bits[row * width + col] = f(row, col) as u8;
            }
        }
        m
    }

    /// Map with ones at the given row-major indices. Panics if an index is
    /// out of range.
    pub fn from_indices(width: usize, height: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(width, height);
        for i in indices {
            m.bits[i] = 1;
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] == 1
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> bool {
        self.bits[index] == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.width + col] = on as u8;
    }

    #[inline]
    pub fn set_index(&mut self, index: usize, on: bool) {
        self.bits[index] = on as u8;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Row-major indices of set pixels, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
    }

    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(a, b)| a <= b)
    }

    pub fn is_disjoint(&self, other: &BinaryMap) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & b == 0)
    }

    fn check_dims(&self, other: &BinaryMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn union(&self, other: &BinaryMap) -> Result<BinaryMap> {
        self.check_dims(other)?;
        Ok(self.zip_with(other, |a, b| a | b))
    }

    pub fn intersection(&self, other: &BinaryMap) -> Result<BinaryMap> {
        self.check_dims(other)?;
        Ok(self.zip_with(other, |a, b| a & b))
    }

    /// `self \ other`
    pub fn difference(&self, other: &BinaryMap) -> Result<BinaryMap> {
        self.check_dims(other)?;
        Ok(self.zip_with(other, |a, b| a & !b & 1))
    }

    pub fn complement(&self) -> BinaryMap {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }

    fn zip_with(&self, other: &BinaryMap, f: impl Fn(u8, u8) -> u8) -> BinaryMap {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn transpose(&self) -> BinaryMap {
        Self::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    /// 0 / 255 image, handy for viewing.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |r, c| if self.get(r, c) { 255.0 } else { 0.0 })
    }

    pub fn encode(&self, format: MapFormat) -> Vec<u8> {
        match format {
            MapFormat::Pgm => {
                let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
                out.extend(self.bits.iter().map(|&b| b * 255));
                out
            }
            MapFormat::Pbm => {
                let mut out = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
                let stride = self.width.div_ceil(8);
                for row in self.bits.chunks(self.width) {
                    let mut packed = vec![0u8; stride];
                    for (c, &b) in row.iter().enumerate() {
                        packed[c / 8] |= b << (7 - c % 8);
                    }
                    out.extend(packed);
                }
                out
            }
        }
    }

    /// Decodes P4, or P5 where any nonzero sample counts as set.
    pub fn decode(bytes: &[u8]) -> Result<BinaryMap> {
        let header = parse_pnm_header(bytes)?;
        let (w, h) = (header.width, header.height);
        let payload = &bytes[header.data_offset..];
        match &header.magic {
            b"P4" => {
                let stride = w.div_ceil(8);
                if payload.len() < stride * h {
                    return Err(Error::MalformedPayload {
                        expected: stride * h,
                        found: payload.len(),
                    });
                }
                Ok(Self::from_fn(w, h, |r, c| {
                    payload[r * stride + c / 8] >> (7 - c % 8) & 1 == 1
                }))
            }
            _ => {
                if header.maxval.is_some_and(|m| m > 255) {
                    return Err(Error::UnsupportedBitDepth("16-bit mask".into()));
                }
                if payload.len() < w * h {
                    return Err(Error::MalformedPayload {
                        expected: w * h,
                        found: payload.len(),
                    });
                }
                Ok(Self::from_fn(w, h, |r, c| payload[r * w + c] != 0))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode(format)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BinaryMap> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
