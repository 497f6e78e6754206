use std::fs;
use std::path::Path;

use super::{quantize, GrayImage};
use crate::error::{Error, Result};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Parsed netpbm header. `maxval` is `None` for bitmaps (P4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PnmHeader {
    pub magic: [u8; 2],
    pub width: usize,
    pub height: usize,
    pub maxval: Option<u32>,
    /// Offset of the first payload byte.
    pub data_offset: usize,
}

/// Reads a netpbm header: magic, whitespace separated decimal fields with
/// `#` comments, then exactly one whitespace byte before the payload.
pub(crate) fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing netpbm magic".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let fields = match magic[1] {
        b'4' => 2,
        b'5' => 3,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "netpbm variant P{} (only P4 and P5 are supported)",
                other as char
            )))
        }
    };

    let mut pos = 2;
    let mut values = Vec::with_capacity(fields);
    while values.len() < fields {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::MalformedHeader("header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader(format!(
                "expected a decimal field at byte {start}"
            )));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        let value: u64 = text
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("field {text} out of range")))?;
        values.push(value);
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("missing separator before payload".into())),
    }

    let (width, height) = (values[0] as usize, values[1] as usize);
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    let maxval = values.get(2).map(|&m| m as u32);
    Ok(PnmHeader {
        magic,
        width,
        height,
        maxval,
        data_offset: pos,
    })
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let header = parse_pnm_header(bytes)?;
    if header.magic != *b"P5" {
        return Err(Error::UnsupportedFormat(
            "bitmap (P4) data is a mask, not a grayscale image".into(),
        ));
    }
    let maxval = header.maxval.expect("P5 carries maxval");
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedBitDepth(format!(
            "maxval {maxval} needs 16-bit samples"
        )));
    }
    let expected = header.width * header.height;
    let payload = &bytes[header.data_offset..];
    if payload.len() < expected {
        return Err(Error::MalformedPayload {
            expected,
            found: payload.len(),
        });
    }
    let scale = 255.0 / maxval as f64;
    let data = payload[..expected]
        .iter()
        .map(|&b| (b as f64 * scale).min(255.0))
        .collect();
    GrayImage::new(header.width, header.height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::{DynamicImage, ImageFormat};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::MalformedHeader(format!("png: {e}")))?;
    let luma = match img {
        DynamicImage::ImageLuma8(l) => l,
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_)
        | DynamicImage::ImageRgb32F(_)
        | DynamicImage::ImageRgba32F(_) => {
            return Err(Error::UnsupportedBitDepth(
                "png with more than 8 bits per sample".into(),
            ))
        }
        other => other.to_luma8(),
    };
    let (w, h) = luma.dimensions();
    GrayImage::new(
        w as usize,
        h as usize,
        luma.into_raw().into_iter().map(f64::from).collect(),
    )
}

/// Loads a binary PGM (P5, maxval ≤ 255) or an 8-bit PNG. Formats are
/// detected from the file contents, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P") {
        decode_pgm(&bytes)
    } else {
        Err(Error::MalformedHeader(format!(
            "{}: neither PGM nor PNG",
            path.display()
        )))
    }
}

pub(crate) fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize(v) as u8));
    out
}

/// Writes `img` rounded and clamped to 8 bits. A `.png` extension selects
/// PNG, anything else binary PGM.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let raw: Vec<u8> = img.pixels().iter().map(|&v| quantize(v) as u8).collect();
        let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, raw)
            .expect("buffer sized to dims");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::UnsupportedFormat(other.to_string()),
            })
    } else {
        fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
    }
}
