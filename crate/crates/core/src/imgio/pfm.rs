//! Single-channel PFM maps in the Scene Flow convention: a negative scale marks a
//! little-endian payload and rows are stored bottom-to-top.

use std::fs;
use std::path::Path;

use super::pnm::HeaderReader;
use super::types::DisparityMap;
use crate::error::{Error, Result};

pub fn decode_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut header = HeaderReader::new(bytes);
    match header.token() {
        Some((_, "Pf")) => {}
        Some((_, "PF")) => {
            return Err(Error::UnsupportedChannels {
                magic: "PF".into(),
            })
        }
        Some((_, m)) => return Err(Error::UnsupportedMagic { magic: m.into() }),
        None => {
            return Err(Error::UnsupportedMagic {
                magic: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
            })
        }
    }
    let (off, w) = header.uint("width")?;
    let (_, h) = header.uint("height")?;
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader {
            offset: off,
            reason: format!("empty {w}x{h} map"),
        });
    }
    let (width, height) = (w as usize, h as usize);
    let at = header.pos();
    let (scale_off, tok) = header.token().ok_or(Error::BadScale {
        offset: at,
        reason: "missing scale".into(),
    })?;
    let scale: f64 = tok.parse().map_err(|_| Error::BadScale {
        offset: scale_off,
        reason: format!("{tok:?} is not a number"),
    })?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::BadScale {
            offset: scale_off,
            reason: format!("scale must be finite and nonzero, got {tok}"),
        });
    }
    let little_endian = scale < 0.0;
    let start = header.end_of_header()?;

    let count = width.checked_mul(height).ok_or(Error::MalformedHeader {
        offset: off,
        reason: "map dimensions overflow".into(),
    })?;
    let expected = count * 4;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            offset: bytes.len(),
            expected,
            found: payload.len(),
        });
    }

    let mut values = vec![0.0f32; count];
    for (stored_row, chunk) in payload[..expected].chunks_exact(width * 4).enumerate() {
        let y = height - 1 - stored_row;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            let v = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            // Negative disparities fall outside the map's domain and read as invalid.
            values[y * width + x] = if v.is_finite() && v >= 0.0 {
                v
            } else {
                DisparityMap::INVALID
            };
        }
    }
    Ok(DisparityMap::from_raw(width, height, values))
}

pub fn encode_pfm(map: &DisparityMap) -> Result<Vec<u8>> {
    let (width, height) = map.dimensions();
    if width == 0 || height == 0 {
        return Err(Error::param("map", format!("cannot encode an empty {width}x{height} map")));
    }
    let mut out = format!("Pf\n{width} {height}\n-1.000000\n").into_bytes();
    out.reserve(width * height * 4);
    for y in (0..height).rev() {
        for &v in &map.values()[y * width..(y + 1) * width] {
            let v = if v.is_finite() { v } else { f32::NAN };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn write_pfm(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pfm(map)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
