use std::path::Path;

use super::pnm::{write_ppm, RgbImage};
use super::types::{DepthLabel, DisparityMap, LabelMap};
use crate::error::{Error, Result};

/// Viridis sampled at nine evenly spaced stops; index 4 is the exact midpoint.
pub const RAMP: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 145, 140],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Samples the ramp at `t` in `[0, 1]` (clamped) with linear blending between stops.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |k: usize| (a[k] as f64 * (1.0 - f) + b[k] as f64 * f).round() as u8;
    [mix(0), mix(1), mix(2)]
}

/// Maps valid disparities from `[d_lo, d_hi]` onto the ramp; invalid pixels are
/// black. With an overlay, FRONT pixels render white and BEHIND pixels black.
pub fn colorize_rgb(
    map: &DisparityMap,
    d_lo: f64,
    d_hi: f64,
    overlay: Option<&LabelMap>,
) -> Result<RgbImage> {
    if !(d_lo.is_finite() && d_hi.is_finite() && d_lo < d_hi) {
        return Err(Error::param(
            "range",
            format!("colorize needs d_lo < d_hi, got [{d_lo}, {d_hi}]"),
        ));
    }
    if let Some(labels) = overlay {
        if labels.dimensions() != map.dimensions() {
            return Err(Error::DimensionMismatch("overlay and map sizes differ".into()));
        }
    }
    let span = d_hi - d_lo;
    let data = map
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            match overlay.and_then(|l| DepthLabel::from_code(l.labels()[i])) {
                Some(DepthLabel::Front) => return [255, 255, 255],
                Some(DepthLabel::Behind) => return [0, 0, 0],
                _ => {}
            }
            if v.is_finite() {
                ramp((f64::from(v) - d_lo) / span)
            } else {
                [0, 0, 0]
            }
        })
        .collect();
    Ok(RgbImage {
        width: map.width(),
        height: map.height(),
        data,
    })
}

pub fn colorize(
    map: &DisparityMap,
    d_lo: f64,
    d_hi: f64,
    overlay: Option<&LabelMap>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_ppm(&colorize_rgb(map, d_lo, d_hi, overlay)?, path)
}
