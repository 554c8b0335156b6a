use crate::imgio::{GrayImage, Mask};

/// Largest descriptor radius whose bit string fits in a `u128`.
pub const MAX_CENSUS_RADIUS: usize = 5;

/// Census bit strings: bit set where the neighbor is darker than the center.
#[derive(Debug, Clone)]
pub struct CensusImage {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u128>,
    pub valid: Vec<bool>,
}

impl CensusImage {
    /// Pixels whose window leaves the image, or touches an invalid source pixel,
    /// carry no descriptor.
    pub fn compute(img: &GrayImage, validity: Option<&Mask>, radius: usize) -> Self {
        assert!((1..=MAX_CENSUS_RADIUS).contains(&radius));
        let (w, h) = img.dimensions();
        let mut codes = vec![0u128; w * h];
        let mut valid = vec![false; w * h];
        let px = img.pixels();
        let r = radius as isize;
        if w > 2 * radius && h > 2 * radius {
            for y in radius..h - radius {
                for x in radius..w - radius {
                    let window_ok = validity.is_none_or(|m| {
                        (y - radius..=y + radius)
                            .all(|yy| (x - radius..=x + radius).all(|xx| m.get(xx, yy)))
                    });
                    if !window_ok {
                        continue;
                    }
                    let center = px[y * w + x];
                    let mut code = 0u128;
                    for dy in -r..=r {
                        let row = ((y as isize + dy) as usize) * w;
                        for dx in -r..=r {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let v = px[row + (x as isize + dx) as usize];
                            code = (code << 1) | u128::from(v < center);
                        }
                    }
                    codes[y * w + x] = code;
                    valid[y * w + x] = true;
                }
            }
        }
        Self {
            width: w,
            height: h,
            codes,
            valid,
        }
    }
}

#[inline]
pub fn hamming(a: u128, b: u128) -> u32 {
    (a ^ b).count_ones()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn border_pixels_have_no_descriptor() {
        let img = GrayImage::from_fn(5, 5, |x, y| ((x * 7 + y * 3) % 5) as f32 / 5.0);
        let c = CensusImage::compute(&img, None, 1);
        assert!(!c.valid[0]);
        assert!(c.valid[6]);
        assert_eq!(c.valid.iter().filter(|&&v| v).count(), 9);
    }

    #[test]
    fn bit_order_and_strictness() {
        // 3x3 with center 0.5: neighbors row-major, skipping the center
        let img = GrayImage::new(3, 3, vec![0.0, 1.0, 0.5, 0.5, 0.5, 0.2, 0.9, 0.1, 0.7]).unwrap();
        let c = CensusImage::compute(&img, None, 1);
        // darker: 0.0 yes, 1.0 no, 0.5 no (tie), 0.5 no, 0.2 yes, 0.9 no, 0.1 yes, 0.7 no
        assert_eq!(c.codes[4], 0b1000_1010);
    }

    #[test]
    fn affine_order_preserving_change_keeps_codes() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 37 + y * 91) % 17) as f32 / 17.0);
        let scaled = GrayImage::from_fn(9, 7, |x, y| img.get(x, y) * 0.5 + 0.25);
        let a = CensusImage::compute(&img, None, 2);
        let b = CensusImage::compute(&scaled, None, 2);
        assert_eq!(a.codes, b.codes);
    }

    #[test]
    fn invalid_source_pixels_poison_windows() {
        let img = GrayImage::from_fn(6, 3, |x, _| x as f32 / 6.0);
        let mut bits = vec![true; 18];
        bits[2 * 6] = false; // (0, 2)
        let mask = Mask::new(6, 3, bits).unwrap();
        let c = CensusImage::compute(&img, Some(&mask), 1);
        assert!(!c.valid[6 + 1]);
        assert!(c.valid[6 + 2]);
    }
}
