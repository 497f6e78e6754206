use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edge::BinaryMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;

const BINARY_MAGIC: &[u8; 8] = b"MARMEAS1";

/// Sampled pixels of one acquisition: `(row, col)` positions in strictly
/// increasing row-major order and the intensities read there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementsRepr", into = "MeasurementsRepr")]
pub struct Measurements {
    width: usize,
    height: usize,
    positions: Vec<(usize, usize)>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementsRepr {
    width: usize,
    height: usize,
    positions: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl TryFrom<MeasurementsRepr> for Measurements {
    type Error = Error;

    fn try_from(r: MeasurementsRepr) -> Result<Self> {
        Measurements::new((r.width, r.height), r.positions, r.values)
    }
}

impl From<Measurements> for MeasurementsRepr {
    fn from(m: Measurements) -> Self {
        MeasurementsRepr {
            width: m.width,
            height: m.height,
            positions: m.positions,
            values: m.values,
        }
    }
}

/// Serialization choice for [`Measurements`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementFormat {
    /// `MARMEAS1`, then little-endian u64 width, height, count, then
    /// `count` records of (u32 row, u32 col, f64 value).
    #[default]
    Binary,
    /// First line `width height count`, then one `row col value` line per
    /// sample.
    Text,
    Json,
}

impl Measurements {
    pub fn new(dims: (usize, usize), positions: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        let (width, height) = dims;
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("measurement dims must be positive".into()));
        }
        if positions.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} positions but {} values",
                positions.len(),
                values.len()
            )));
        }
        let mut prev: Option<usize> = None;
        for &(r, c) in &positions {
            if r >= height || c >= width {
                return Err(Error::InvalidArgument(format!(
                    "position ({r}, {c}) outside {width}x{height}"
                )));
            }
            let idx = r * width + c;
            if prev.is_some_and(|p| p >= idx) {
                return Err(Error::InvalidArgument(
                    "positions must be unique and sorted row-major".into(),
                ));
            }
            prev = Some(idx);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite measurement value".into()));
        }
        Ok(Self {
            width,
            height,
            positions,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major indices of the sampled pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions.iter().map(|&(r, c)| r * self.width + c)
    }

    /// The sampling pattern these measurements were taken with.
    pub fn support(&self) -> BinaryMap {
        BinaryMap::from_indices(self.width, self.height, self.indices())
    }

    /// Values at their positions, `fill` elsewhere.
    pub fn embed(&self, fill: f64) -> GrayImage {
        let mut data = vec![fill; self.width * self.height];
        for (i, &v) in self.indices().zip(&self.values) {
            data[i] = v;
        }
        GrayImage::new(self.width, self.height, data).expect("finite by construction")
    }

    pub fn encode(&self, format: MeasurementFormat) -> Result<Vec<u8>> {
        Ok(match format {
            MeasurementFormat::Binary => {
                let mut out = Vec::with_capacity(32 + 16 * self.len());
                out.extend_from_slice(BINARY_MAGIC);
                for v in [self.width, self.height, self.len()] {
                    out.extend_from_slice(&(v as u64).to_le_bytes());
                }
                for (&(r, c), v) in self.positions.iter().zip(&self.values) {
                    out.extend_from_slice(&(r as u32).to_le_bytes());
                    out.extend_from_slice(&(c as u32).to_le_bytes());
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
            MeasurementFormat::Text => {
                let mut s = format!("{} {} {}\n", self.width, self.height, self.len());
                for (&(r, c), v) in self.positions.iter().zip(&self.values) {
                    s.push_str(&format!("{r} {c} {v}\n"));
                }
                s.into_bytes()
            }
            MeasurementFormat::Json => serde_json::to_vec(self)?,
        })
    }

    /// Decodes any of the three formats, detected from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(BINARY_MAGIC) {
            decode_binary(&bytes[BINARY_MAGIC.len()..])
        } else if bytes.first() == Some(&b'{') {
            Ok(serde_json::from_slice(bytes)?)
        } else {
            decode_text(bytes)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: MeasurementFormat) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode(format)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

fn decode_binary(mut body: &[u8]) -> Result<Measurements> {
    let mut take = |n: usize| -> Result<&[u8]> {
        if body.len() < n {
            return Err(Error::MalformedPayload {
                expected: n,
                found: body.len(),
            });
        }
        let (head, rest) = body.split_at(n);
        body = rest;
        Ok(head)
    };
    let mut header = [0usize; 3];
    for h in &mut header {
        *h = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    }
    let [width, height, count] = header;
    if count > width.saturating_mul(height) {
        return Err(Error::MalformedHeader(format!(
            "{count} samples exceed {width}x{height}"
        )));
    }
    let mut positions = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let rec = take(16)?;
        let r = u32::from_le_bytes(rec[0..4].try_into().unwrap()) as usize;
        let c = u32::from_le_bytes(rec[4..8].try_into().unwrap()) as usize;
        positions.push((r, c));
        values.push(f64::from_le_bytes(rec[8..16].try_into().unwrap()));
    }
    Measurements::new((width, height), positions, values)
}

fn decode_text(bytes: &[u8]) -> Result<Measurements> {
    let bad = |line: usize| Error::MalformedHeader(format!("measurement text line {line}"));
    let mut lines = BufReader::new(bytes).lines();
    let header = lines.next().ok_or_else(|| bad(1))?.map_err(|_| bad(1))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(1)))
        .collect::<Result<_>>()?;
    let [width, height, count] = head[..] else {
        return Err(bad(1));
    };
    let mut positions = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|_| bad(i + 2))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut field = || it.next().ok_or_else(|| bad(i + 2));
        let r: usize = field()?.parse().map_err(|_| bad(i + 2))?;
        let c: usize = field()?.parse().map_err(|_| bad(i + 2))?;
        let v: f64 = field()?.parse().map_err(|_| bad(i + 2))?;
        positions.push((r, c));
        values.push(v);
    }
    if positions.len() != count {
        return Err(Error::MalformedHeader(format!(
            "header declares {count} samples, found {}",
            positions.len()
        )));
    }
    Measurements::new((width, height), positions, values)
}
