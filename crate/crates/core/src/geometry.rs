//! Fronto-parallel plane schedules and the plane-induced warp for rectified pairs.
//!
//! With the left image as reference, a scene point at disparity `d` satisfies
//! `L(x, y) = R(x - d, y)`. The plane at disparity `d` therefore warps the
//! right image by a uniform shift of `d` pixels toward larger `x`.

use crate::error::{Error, Result};
use crate::imgio::{GrayImage, Mask};

/// Strictly increasing, non-negative plane disparities.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSchedule {
    disparities: Vec<f64>,
}

impl PlaneSchedule {
    pub fn new(disparities: Vec<f64>) -> Result<Self> {
        if disparities.is_empty() {
            return Err(Error::param("schedule", "at least one plane is required"));
        }
        if let Some(d) = disparities.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::param(
                "schedule",
                format!("plane disparity {d} is not a finite non-negative value"),
            ));
        }
        if let Some(w) = disparities.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "schedule",
                format!("planes must strictly increase, found {} then {}", w[0], w[1]),
            ));
        }
        Ok(Self { disparities })
    }

    /// `levels - 1` planes evenly spaced strictly inside `(0, d_max)`, giving
    /// `levels` quantization bins.
    pub fn for_levels(d_max: f64, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::param("levels", format!("need at least 2 levels, got {levels}")));
        }
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::param("d_max", format!("must be positive, got {d_max}")));
        }
        Self::new(
            (1..levels)
                .map(|k| d_max * k as f64 / levels as f64)
                .collect(),
        )
    }

    pub fn disparities(&self) -> &[f64] {
        &self.disparities
    }

    pub fn len(&self) -> usize {
        self.disparities.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.disparities[0]
    }

    pub fn last(&self) -> f64 {
        self.disparities[self.disparities.len() - 1]
    }
}

/// `count` planes evenly spaced over `[d_min, d_max]`, endpoints included.
pub fn uniform_schedule(d_min: f64, d_max: f64, count: usize) -> Result<PlaneSchedule> {
    if !d_min.is_finite() || !d_max.is_finite() {
        return Err(Error::param("range", format!("bounds must be finite, got [{d_min}, {d_max}]")));
    }
    match count {
        0 => Err(Error::param("count", "at least one plane is required")),
        1 if d_min == d_max => PlaneSchedule::new(vec![d_min]),
        1 => Err(Error::param(
            "count",
            format!("a single plane needs d_min == d_max, got [{d_min}, {d_max}]"),
        )),
        _ if d_min >= d_max => Err(Error::param(
            "range",
            format!("d_min must be below d_max, got [{d_min}, {d_max}]"),
        )),
        _ => {
            let step = (d_max - d_min) / (count - 1) as f64;
            let mut planes: Vec<f64> = (0..count).map(|i| d_min + step * i as f64).collect();
            planes[count - 1] = d_max;
            PlaneSchedule::new(planes)
        }
    }
}

/// Right image resampled onto the plane at one disparity.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: GrayImage,
    /// False where the warp sampled left of the source.
    pub validity: Mask,
}

/// `output(x, y) = right(x - d, y)` with linear interpolation for fractional `d`.
/// The leftmost `ceil(d)` columns fall outside the source and are invalid (zero).
pub fn warp_right(right: &GrayImage, d: f64) -> Result<WarpedImage> {
    warp_right_padded(right, d, 0)
}

/// [`warp_right`] onto a canvas `pad` columns wider than the source, so source
/// columns shifted past the right edge are kept. Canvas columns beyond the
/// shifted source are invalid as well.
pub fn warp_right_padded(right: &GrayImage, d: f64, pad: usize) -> Result<WarpedImage> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::param("disparity", format!("warp needs finite d >= 0, got {d}")));
    }
    let (w, h) = right.dimensions();
    if d == 0.0 && pad == 0 {
        return Ok(WarpedImage {
            image: right.clone(),
            validity: Mask::filled(w, h, true),
        });
    }
    let out_w = w + pad;
    let shift = d.floor();
    let frac = (d - shift) as f32;
    let shift = shift as usize;
    let first_valid = (d.ceil() as usize).min(out_w);
    let end = (w + shift).min(out_w).max(first_valid);

    let mut pixels = vec![0.0f32; out_w * h];
    let mut valid = vec![false; out_w * h];
    for y in 0..h {
        let src = right.row(y);
        let out = &mut pixels[y * out_w..(y + 1) * out_w];
        for x in first_valid..end {
            // source position x - d = (x - shift) - frac
            let hi = x - shift;
            out[x] = if frac == 0.0 {
                src[hi]
            } else {
                src[hi - 1] * frac + src[hi] * (1.0 - frac)
            };
        }
        valid[y * out_w + first_valid..y * out_w + end].fill(true);
    }
    Ok(WarpedImage {
        image: GrayImage::from_raw(out_w, h, pixels),
        validity: Mask::from_raw(out_w, h, valid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_schedule_examples() {
        let s = uniform_schedule(0.0, 192.0, 193).unwrap();
        assert_eq!(s.len(), 193);
        assert!(s.disparities().iter().enumerate().all(|(i, &d)| d == i as f64));

        let s = uniform_schedule(18.0, 42.0, 25).unwrap();
        assert!(s.disparities().iter().enumerate().all(|(i, &d)| d == 18.0 + i as f64));

        assert_eq!(uniform_schedule(5.0, 5.0, 1).unwrap().disparities(), &[5.0]);
    }

    #[test]
    fn uniform_schedule_errors() {
        assert!(uniform_schedule(f64::NAN, 3.0, 3).is_err());
        assert!(uniform_schedule(4.0, 3.0, 3).is_err());
        assert!(uniform_schedule(3.0, 3.0, 2).is_err());
        assert!(uniform_schedule(1.0, 3.0, 0).is_err());
        assert!(uniform_schedule(1.0, 3.0, 1).is_err());
        assert!(uniform_schedule(-1.0, 3.0, 3).is_err());
    }

    #[test]
    fn levels_place_planes_inside_range() {
        let s = PlaneSchedule::for_levels(60.0, 4).unwrap();
        assert_eq!(s.disparities(), &[15.0, 30.0, 45.0]);
        for (levels, planes) in [(2, 1), (4, 3), (8, 7), (16, 15)] {
            assert_eq!(PlaneSchedule::for_levels(192.0, levels).unwrap().len(), planes);
        }
    }

    #[test]
    fn warp_zero_is_identity() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 3 + y) as f32 / 20.0);
        let w = warp_right(&img, 0.0).unwrap();
        assert_eq!(w.image, img);
        assert_eq!(w.validity.count(), 15);
    }

    #[test]
    fn padded_warp_keeps_shifted_columns() {
        let img = GrayImage::from_fn(4, 1, |x, _| x as f32 / 4.0);
        let w = warp_right_padded(&img, 2.0, 3).unwrap();
        assert_eq!(w.image.pixels(), &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 0.0]);
        assert_eq!(w.validity.bits(), &[false, false, true, true, true, true, false]);
        let w = warp_right_padded(&img, 0.5, 2).unwrap();
        assert_eq!(w.image.pixels(), &[0.0, 0.125, 0.375, 0.625, 0.0, 0.0]);
        assert_eq!(w.validity.count(), 3);
        let plain = warp_right(&img, 1.5).unwrap();
        let padded = warp_right_padded(&img, 1.5, 5).unwrap();
        for x in 0..4 {
            assert_eq!(plain.image.get(x, 0), padded.image.get(x, 0));
            assert_eq!(plain.validity.get(x, 0), padded.validity.get(x, 0));
        }
    }

    #[test]
    fn warp_half_pixel() {
        let img = GrayImage::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let w = warp_right(&img, 0.5).unwrap();
        assert_eq!(w.validity.bits(), &[false, true, true]);
        assert_eq!(&w.image.pixels()[1..], &[0.5, 0.5]);
        assert_eq!(w.image.pixels()[0], 0.0);
    }

    #[test]
    fn warp_rejects_bad_disparity() {
        let img = GrayImage::from_fn(3, 1, |_, _| 0.0);
        assert!(warp_right(&img, -1.0).is_err());
        assert!(warp_right(&img, f64::INFINITY).is_err());
    }

    #[test]
    fn warp_past_width_is_all_invalid() {
        let img = GrayImage::from_fn(3, 2, |_, _| 0.5);
        let w = warp_right(&img, 7.5).unwrap();
        assert_eq!(w.validity.count(), 0);
    }

    fn piecewise_linear(width: usize, height: usize, knots: &[f32]) -> GrayImage {
        // intensities at integer columns; linear interpolation between them is
        // the image's continuous model
        GrayImage::from_fn(width, height, |x, y| knots[(x + 3 * y) % knots.len()])
    }

    proptest! {
        #[test]
        fn invalid_band_is_ceil_d(d in 0.0f64..12.0, w in 1usize..20) {
            let img = GrayImage::from_fn(w, 2, |x, _| x as f32 / 20.0);
            let warped = warp_right(&img, d).unwrap();
            let band = (d.ceil() as usize).min(w);
            for y in 0..2 {
                for x in 0..w {
                    prop_assert_eq!(warped.validity.get(x, y), x >= band);
                    if x < band {
                        prop_assert_eq!(warped.image.get(x, y), 0.0);
                    }
                }
            }
        }

        #[test]
        fn integer_shift_composition_is_exact(
            a in 0.0f64..6.0,
            b in 0u32..6,
            knots in proptest::collection::vec(0.0f32..1.0, 7),
        ) {
            let img = piecewise_linear(24, 3, &knots);
            let once = warp_right(&img, a + b as f64).unwrap();
            let first = warp_right(&img, a).unwrap();
            let twice = warp_right(&first.image, b as f64).unwrap();
            for y in 0..3 {
                for x in (a.ceil() as usize + b as usize)..24 {
                    prop_assert!(once.validity.get(x, y));
                    prop_assert!((once.image.get(x, y) - twice.image.get(x, y)).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn fractional_composition_on_piecewise_linear(
            a in 0u32..6,
            b in 0.0f64..6.0,
            knots in proptest::collection::vec(0.0f32..1.0, 7),
        ) {
            // integer first shift keeps samples on the knot grid, so a fractional
            // second shift reproduces the single warp
            let img = piecewise_linear(24, 3, &knots);
            let once = warp_right(&img, a as f64 + b).unwrap();
            let first = warp_right(&img, a as f64).unwrap();
            let twice = warp_right(&first.image, b).unwrap();
            for y in 0..3 {
                for x in (a as usize + b.ceil() as usize)..24 {
                    prop_assert!((once.image.get(x, y) - twice.image.get(x, y)).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn fractional_composition_on_ramp(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let img = GrayImage::from_fn(32, 2, |x, _| x as f32 / 40.0);
            let once = warp_right(&img, a + b).unwrap();
            let twice = warp_right(&warp_right(&img, a).unwrap().image, b).unwrap();
            for x in (a.ceil() as usize + b.ceil() as usize)..32 {
                prop_assert!((once.image.get(x, 0) - twice.image.get(x, 0)).abs() <= 1e-6);
            }
        }
    }
}
