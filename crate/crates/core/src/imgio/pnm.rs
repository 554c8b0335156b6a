//! Netpbm grayscale (P5/P2) and color (P6) codecs.

use std::fs;
use std::path::Path;

use super::types::GrayImage;
use crate::error::{Error, Result};

/// Cursor over a Netpbm header that tracks byte offsets for diagnostics.
pub(crate) struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Next whitespace-delimited token and the offset where it starts.
    pub(crate) fn token(&mut self) -> Option<(usize, &'a str)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .map(|s| (start, s))
    }

    pub(crate) fn uint(&mut self, what: &str) -> Result<(usize, u64)> {
        let at = self.pos;
        let (offset, tok) = self.token().ok_or_else(|| Error::MalformedHeader {
            offset: at,
            reason: format!("missing {what}"),
        })?;
        let value = tok.parse::<u64>().map_err(|_| Error::MalformedHeader {
            offset,
            reason: format!("{what} {tok:?} is not a non-negative integer"),
        })?;
        Ok((offset, value))
    }

    /// Consumes the single whitespace byte separating a binary header from its payload.
    pub(crate) fn end_of_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(self.pos)
            }
            _ => Err(Error::MalformedHeader {
                offset: self.pos,
                reason: "expected a single whitespace byte before the payload".into(),
            }),
        }
    }
}

fn dimension(offset: usize, value: u64, what: &str) -> Result<usize> {
    if value == 0 {
        return Err(Error::MalformedHeader {
            offset,
            reason: format!("{what} must be positive"),
        });
    }
    usize::try_from(value).map_err(|_| Error::MalformedHeader {
        offset,
        reason: format!("{what} {value} is too large"),
    })
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = HeaderReader::new(bytes);
    let magic = match header.token() {
        Some((_, m)) => m,
        None => {
            return Err(Error::UnsupportedMagic {
                magic: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
            })
        }
    };
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        _ => {
            return Err(Error::UnsupportedMagic {
                magic: magic.to_owned(),
            })
        }
    };
    let (off, w) = header.uint("width")?;
    let width = dimension(off, w, "width")?;
    let (off, h) = header.uint("height")?;
    let height = dimension(off, h, "height")?;
    let (off, maxval) = header.uint("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader {
            offset: off,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let count = width.checked_mul(height).ok_or(Error::MalformedHeader {
        offset: off,
        reason: "image dimensions overflow".into(),
    })?;
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(count);

    if binary {
        let start = header.end_of_header()?;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let expected = count * bytes_per;
        let payload = &bytes[start..];
        if payload.len() < expected {
            return Err(Error::Truncated {
                offset: bytes.len(),
                expected,
                found: payload.len(),
            });
        }
        for i in 0..count {
            let raw = if bytes_per == 2 {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u64
            } else {
                payload[i] as u64
            };
            if raw > maxval {
                return Err(Error::MalformedPayload {
                    offset: start + i * bytes_per,
                    reason: format!("sample {raw} exceeds maxval {maxval}"),
                });
            }
            pixels.push((raw as f64 / scale) as f32);
        }
    } else {
        for i in 0..count {
            let at = header.pos();
            let (offset, tok) = header.token().ok_or(Error::Truncated {
                offset: at,
                expected: count,
                found: i,
            })?;
            let raw = tok.parse::<u64>().map_err(|_| Error::MalformedPayload {
                offset,
                reason: format!("sample {tok:?} is not a non-negative integer"),
            })?;
            if raw > maxval {
                return Err(Error::MalformedPayload {
                    offset,
                    reason: format!("sample {raw} exceeds maxval {maxval}"),
                });
            }
            pixels.push((raw as f64 / scale) as f32);
        }
    }
    Ok(GrayImage::from_raw(width, height, pixels))
}

/// Quantizes an intensity in `[0, 1]` to 8 bits, rounding halves up.
#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    (f64::from(v) * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&p| quantize_u8(p)));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

/// 8-bit RGB raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().flatten());
    out
}

pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}
