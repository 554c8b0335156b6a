use crate::error::{Error, Result};

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::DimensionMismatch(format!(
            "{width}x{height} grid cannot hold {len} values"
        ))),
    }
}

/// Grayscale image with intensities normalized to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        check_len(width, height, pixels.len())?;
        if let Some(i) = pixels
            .iter()
            .position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::param(
                "intensity",
                format!("pixel {i} is {} (expected a value in [0, 1])", pixels[i]),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)`; results are clamped to `[0, 1]`
    /// and NaN becomes 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(width * height, pixels.len());
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }
}

/// Rectified stereo pair; the left image is the reference view.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoPair {
    left: GrayImage,
    right: GrayImage,
}

impl StereoPair {
    pub fn new(left: GrayImage, right: GrayImage) -> Result<Self> {
        if left.dimensions() != right.dimensions() {
            return Err(Error::DimensionMismatch(format!(
                "left is {}x{}, right is {}x{}",
                left.width, left.height, right.width, right.height
            )));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &GrayImage {
        &self.left
    }

    pub fn right(&self) -> &GrayImage {
        &self.right
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.left.dimensions()
    }
}

/// Per-pixel disparity in pixels. Invalid pixels hold [`DisparityMap::INVALID`].
#[derive(Debug, Clone)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DisparityMap {
    pub const INVALID: f32 = f32::NAN;

    /// Non-finite inputs are normalized to the invalid marker; negative finite
    /// disparities are rejected.
    pub fn new(width: usize, height: usize, mut values: Vec<f32>) -> Result<Self> {
        check_len(width, height, values.len())?;
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                *v = Self::INVALID;
            } else if *v < 0.0 {
                return Err(Error::param(
                    "disparity",
                    format!("pixel {i} holds negative disparity {v}"),
                ));
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(width * height, values.len());
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Raw values, invalid pixels included as NaN.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let v = self.values[y * self.width + x];
        v.is_finite().then_some(v)
    }

    #[inline]
    pub fn is_valid_index(&self, i: usize) -> bool {
        self.values[i].is_finite()
    }

    pub fn valid_mask(&self) -> Mask {
        Mask::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|v| v.is_finite()).collect(),
        )
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }
}

impl PartialEq for DisparityMap {
    /// Bitwise on valid values; all invalid markers compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.dimensions() == other.dimensions()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits())
    }
}

/// Semantics of the three-way labels produced by binary and selective depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum DepthLabel {
    /// Farther than the plane (or than the whole range).
    Behind = 0,
    /// Nearer than the plane (or than the whole range).
    Front = 1,
    InRange = 2,
}

impl DepthLabel {
    pub const fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(Self::Behind),
            1 => Some(Self::Front),
            2 => Some(Self::InRange),
            _ => None,
        }
    }
}

/// Per-pixel discrete labels drawn from `0..classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    classes: u16,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, classes: u16, labels: Vec<u16>) -> Result<Self> {
        check_len(width, height, labels.len())?;
        if classes == 0 {
            return Err(Error::param("classes", "label set is empty"));
        }
        if let Some(i) = labels.iter().position(|&l| l >= classes) {
            return Err(Error::param(
                "label",
                format!("pixel {i} has label {} outside 0..{classes}", labels[i]),
            ));
        }
        Ok(Self {
            width,
            height,
            classes,
            labels,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, classes: u16, labels: Vec<u16>) -> Self {
        debug_assert!(labels.iter().all(|&l| l < classes));
        Self {
            width,
            height,
            classes,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> u16 {
        self.classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Intensity rendering: label `k` maps to `k / (classes - 1)`.
    pub fn to_gray(&self) -> GrayImage {
        let denom = f32::from(self.classes.saturating_sub(1).max(1));
        GrayImage::from_raw(
            self.width,
            self.height,
            self.labels.iter().map(|&l| f32::from(l) / denom).collect(),
        )
    }
}

/// Boolean per-pixel selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_len(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, bits: Vec<bool>) -> Self {
        debug_assert_eq!(width * height, bits.len());
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn not(&self) -> Mask {
        Mask::from_raw(self.width, self.height, self.bits.iter().map(|b| !b).collect())
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch("mask sizes differ".into()));
        }
        Ok(Mask::from_raw(
            self.width,
            self.height,
            self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        ))
    }

    /// Nonzero intensities select the pixel.
    pub fn from_gray(img: &GrayImage) -> Mask {
        Mask::from_raw(
            img.width(),
            img.height(),
            img.pixels().iter().map(|&p| p > 0.0).collect(),
        )
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_image_rejects_out_of_range() {
        assert!(GrayImage::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0, f32::NAN]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn disparity_normalizes_non_finite() {
        let m = DisparityMap::new(3, 1, vec![1.0, f32::INFINITY, f32::NAN]).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(1, 0), None);
        assert_eq!(m.valid_count(), 1);
        assert!(DisparityMap::new(1, 1, vec![-1.0]).is_err());
    }

    #[test]
    fn label_map_checks_label_set() {
        assert!(LabelMap::new(2, 1, 2, vec![0, 2]).is_err());
        assert!(LabelMap::new(2, 1, 3, vec![0, 2]).is_ok());
        assert!(LabelMap::new(1, 1, 0, vec![0]).is_err());
    }

    #[test]
    fn pair_requires_equal_dimensions() {
        let a = GrayImage::from_fn(2, 2, |_, _| 0.0);
        let b = GrayImage::from_fn(3, 2, |_, _| 0.0);
        assert!(StereoPair::new(a.clone(), b).is_err());
        assert!(StereoPair::new(a.clone(), a).is_ok());
    }
}
