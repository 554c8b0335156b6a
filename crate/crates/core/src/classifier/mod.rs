//! Per-plane front/behind confidence maps and the classifiers that produce them.

mod aggregate;
pub mod census;
mod residual;

use std::fmt;
use std::str::FromStr;

pub use residual::{classify_plane, direction_vote, ResidualClassifier};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::imgio::{DepthLabel, DisparityMap, LabelMap, Mask};

/// Confidence in `[0, 1]` that a pixel lies in front of a plane; 1 means in
/// front (nearer), 0 behind.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    confidences: Vec<f32>,
    validity: Vec<bool>,
}

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, confidences: Vec<f32>, validity: Vec<bool>) -> Result<Self> {
        if width * height != confidences.len() || confidences.len() != validity.len() {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} confidence map given {} values and {} flags",
                confidences.len(),
                validity.len()
            )));
        }
        if let Some(i) = (0..confidences.len())
            .find(|&i| validity[i] && !(0.0..=1.0).contains(&confidences[i]))
        {
            return Err(Error::param(
                "confidence",
                format!("pixel {i} holds {} outside [0, 1]", confidences[i]),
            ));
        }
        Ok(Self::from_raw(width, height, confidences, validity))
    }

    pub(crate) fn from_raw(width: usize, height: usize, mut confidences: Vec<f32>, validity: Vec<bool>) -> Self {
        for (c, &v) in confidences.iter_mut().zip(&validity) {
            if !v {
                *c = 0.0;
            }
        }
        Self {
            width,
            height,
            confidences,
            validity,
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

    /// Invalid pixels read as 0.
    pub fn confidences(&self) -> &[f32] {
        &self.confidences
    }

    pub fn validity(&self) -> &[bool] {
        &self.validity
    }

    pub fn valid_mask(&self) -> Mask {
        Mask::from_raw(self.width, self.height, self.validity.clone())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.validity[i].then_some(self.confidences[i])
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }

    /// Mean confidence over valid pixels.
    pub fn mean(&self) -> Option<f64> {
        let (sum, n) = self
            .confidences
            .iter()
            .zip(&self.validity)
            .filter(|(_, &v)| v)
            .fold((0.0f64, 0usize), |(s, n), (&c, _)| (s + f64::from(c), n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// `ln(C / (1 - C))` per pixel; the classifiers have no separate logit.
    pub fn log_odds(&self) -> Vec<f32> {
        self.confidences
            .iter()
            .map(|&c| {
                let c = f64::from(c);
                (c / (1.0 - c)).ln() as f32
            })
            .collect()
    }
}

/// Matching cost used by the residual classifier and the brute-force matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Hamming distance of census strings, summed over the aggregation window.
    Census,
    /// `1 - NCC` over the aggregation window.
    Ncc,
}

impl CostKind {
    pub fn default_temperature(self) -> f64 {
        match self {
            CostKind::Census => 4.0,
            CostKind::Ncc => 0.1,
        }
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "census" => Ok(CostKind::Census),
            "ncc" => Ok(CostKind::Ncc),
            other => Err(Error::param("cost", format!("unknown cost kind {other:?} (census|ncc)"))),
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Census => "census",
            CostKind::Ncc => "ncc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub cost: CostKind,
    /// Census window half-width.
    pub desc_radius: usize,
    /// Cost aggregation window half-width.
    pub agg_radius: usize,
    /// Residual offsets searched on each side, `K`.
    pub search_extent: usize,
    pub temperature: f64,
    /// Box-filter radius applied to each confidence slice; 0 disables.
    pub smooth_radius: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::with_cost(CostKind::Census)
    }
}

impl ClassifierConfig {
    pub fn with_cost(cost: CostKind) -> Self {
        Self {
            cost,
            desc_radius: 3,
            agg_radius: 2,
            search_extent: 8,
            temperature: cost.default_temperature(),
            smooth_radius: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.desc_radius < 1 || self.desc_radius > census::MAX_CENSUS_RADIUS {
            return Err(Error::param(
                "desc_radius",
                format!("must be in 1..={}, got {}", census::MAX_CENSUS_RADIUS, self.desc_radius),
            ));
        }
        if self.agg_radius < 1 {
            return Err(Error::param("agg_radius", "must be at least 1"));
        }
        if self.search_extent < 1 {
            return Err(Error::param("search_extent", "must be at least 1"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::param(
                "temperature",
                format!("must be positive, got {}", self.temperature),
            ));
        }
        Ok(())
    }

    /// Consumes the classifier keys (`cost`, `desc_radius`, `agg_radius`,
    /// `search_extent`, `temperature`, `smooth_radius`) from `kv`. A cost change
    /// without an explicit temperature picks that cost's default.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(cost) = kv.take_parsed::<CostKind>("cost")? {
            self.cost = cost;
            self.temperature = cost.default_temperature();
        }
        if let Some(v) = kv.take_parsed("desc_radius")? {
            self.desc_radius = v;
        }
        if let Some(v) = kv.take_parsed("agg_radius")? {
            self.agg_radius = v;
        }
        if let Some(v) = kv.take_parsed("search_extent")? {
            self.search_extent = v;
        }
        if let Some(v) = kv.take_parsed("temperature")? {
            self.temperature = v;
        }
        if let Some(v) = kv.take_parsed("smooth_radius")? {
            self.smooth_radius = v;
        }
        self.validate()
    }
}

/// Anything that can score pixels as in front of a plane at a given disparity.
pub trait PlaneClassifier: Sync {
    fn dimensions(&self) -> (usize, usize);
    fn classify(&self, d: f64) -> Result<ConfidenceMap>;
}

/// Ideal step classifier from ground truth: 1 where `d < gt`, 0 where `d >= gt`.
pub struct OracleClassifier<'a> {
    gt: &'a DisparityMap,
}

impl<'a> OracleClassifier<'a> {
    pub fn new(gt: &'a DisparityMap) -> Self {
        Self { gt }
    }
}

impl PlaneClassifier for OracleClassifier<'_> {
    fn dimensions(&self) -> (usize, usize) {
        self.gt.dimensions()
    }

    fn classify(&self, d: f64) -> Result<ConfidenceMap> {
        Ok(oracle_classify(self.gt, d))
    }
}

pub fn oracle_classify(gt: &DisparityMap, d: f64) -> ConfidenceMap {
    let (w, h) = gt.dimensions();
    let validity: Vec<bool> = gt.values().iter().map(|v| v.is_finite()).collect();
    let conf = gt
        .values()
        .iter()
        .map(|&g| if g.is_finite() && d < f64::from(g) { 1.0 } else { 0.0 })
        .collect();
    ConfidenceMap::from_raw(w, h, conf, validity)
}

/// FRONT where confidence is at least 0.5, BEHIND otherwise. Invalid pixels
/// read as BEHIND; their validity stays on the confidence map.
pub fn binarize(c: &ConfidenceMap) -> LabelMap {
    let labels = c
        .confidences
        .iter()
        .zip(&c.validity)
        .map(|(&v, &ok)| {
            if ok && v >= 0.5 {
                DepthLabel::Front.code()
            } else {
                DepthLabel::Behind.code()
            }
        })
        .collect();
    LabelMap::from_raw(c.width, c.height, 2, labels)
}

/// Mean over valid neighbors in a `(2r+1)^2` window, truncated at the borders.
/// Invalid pixels stay invalid.
pub fn smooth_confidence(c: &ConfidenceMap, radius: usize) -> ConfidenceMap {
    if radius == 0 {
        return c.clone();
    }
    let (w, h) = c.dimensions();
    // integral images of values and valid counts, (w+1) x (h+1)
    let stride = w + 1;
    let mut sum = vec![0.0f64; stride * (h + 1)];
    let mut cnt = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let (mut rs, mut rc) = (0.0f64, 0u32);
        for x in 0..w {
            let i = y * w + x;
            if c.validity[i] {
                rs += f64::from(c.confidences[i]);
                rc += 1;
            }
            sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
            cnt[(y + 1) * stride + x + 1] = cnt[y * stride + x + 1] + rc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(h));
        for x in 0..w {
            let i = y * w + x;
            if !c.validity[i] {
                continue;
            }
            let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(w));
            let s = sum[y1 * stride + x1] - sum[y0 * stride + x1] - sum[y1 * stride + x0]
                + sum[y0 * stride + x0];
            let n = cnt[y1 * stride + x1] - cnt[y0 * stride + x1] - cnt[y1 * stride + x0]
                + cnt[y0 * stride + x0];
            out[i] = (s / f64::from(n)).clamp(0.0, 1.0) as f32;
        }
    }
    ConfidenceMap::from_raw(w, h, out, c.validity.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(vals: &[f32]) -> ConfidenceMap {
        ConfidenceMap::new(vals.len(), 1, vals.to_vec(), vec![true; vals.len()]).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let gt = DisparityMap::filled(1, 1, 7.0).unwrap();
        assert_eq!(oracle_classify(&gt, 0.0).get(0, 0), Some(1.0));
        assert_eq!(oracle_classify(&gt, 7.0).get(0, 0), Some(0.0));
        assert_eq!(oracle_classify(&gt, 6.5).get(0, 0), Some(1.0));
        let gt = DisparityMap::new(2, 1, vec![f32::NAN, 3.0]).unwrap();
        let c = oracle_classify(&gt, 1.0);
        assert_eq!(c.get(0, 0), None);
        assert_eq!(c.get(1, 0), Some(1.0));
    }

    #[test]
    fn binarize_threshold_and_tie() {
        let labels = binarize(&map(&[0.7, 0.2, 0.5]));
        let front = DepthLabel::Front.code();
        let behind = DepthLabel::Behind.code();
        assert_eq!(labels.labels(), &[front, behind, front]);
        let invalid = ConfidenceMap::new(1, 1, vec![0.9], vec![false]).unwrap();
        assert_eq!(binarize(&invalid).labels(), &[behind]);
    }

    #[test]
    fn smoothing_examples() {
        let c = map(&[0.0, 1.0, 1.0]);
        assert_eq!(smooth_confidence(&c, 0), c);
        let s = smooth_confidence(&c, 1);
        assert_eq!(s.confidences(), &[0.5, (2.0f64 / 3.0) as f32, 1.0]);
        let flat = map(&[0.3; 6]);
        assert_eq!(smooth_confidence(&flat, 2), flat);
    }

    #[test]
    fn smoothing_skips_invalid_neighbors() {
        let c = ConfidenceMap::new(3, 1, vec![0.0, 1.0, 0.2], vec![false, true, true]).unwrap();
        let s = smooth_confidence(&c, 1);
        assert_eq!(s.get(0, 0), None);
        assert_eq!(s.get(1, 0), Some(0.6));
    }

    #[test]
    fn confidence_map_validates() {
        assert!(ConfidenceMap::new(1, 1, vec![1.5], vec![true]).is_err());
        assert!(ConfidenceMap::new(1, 1, vec![1.5], vec![false]).is_ok());
        assert!(ConfidenceMap::new(2, 1, vec![0.5], vec![true]).is_err());
    }

    #[test]
    fn log_odds_of_half_is_zero() {
        assert_eq!(map(&[0.5]).log_odds(), vec![0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        let mut cfg = ClassifierConfig::default();
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ClassifierConfig::default();
        cfg.search_extent = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ClassifierConfig::default();
        cfg.desc_radius = 6;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_from_key_values() {
        let mut kv = KeyValues::parse("cost = ncc\nagg_radius = 3\nsearch_extent=12\n").unwrap();
        let mut cfg = ClassifierConfig::default();
        cfg.apply(&mut kv).unwrap();
        assert_eq!(cfg.cost, CostKind::Ncc);
        assert_eq!(cfg.temperature, 0.1);
        assert_eq!((cfg.agg_radius, cfg.search_extent), (3, 12));
        kv.finish().unwrap();

        let mut kv = KeyValues::parse("temperature = 2.5\ncost = census").unwrap();
        let mut cfg = ClassifierConfig::with_cost(CostKind::Ncc);
        cfg.apply(&mut kv).unwrap();
        assert_eq!((cfg.cost, cfg.temperature), (CostKind::Census, 2.5));

        let mut kv = KeyValues::parse("cost = sad").unwrap();
        assert!(ClassifierConfig::default().apply(&mut kv).is_err());
    }

    proptest! {
        #[test]
        fn oracle_is_monotone_in_plane(
            gt in proptest::collection::vec(0.0f32..40.0, 1..40),
            a in 0.0f64..40.0,
            b in 0.0f64..40.0,
        ) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let gt = DisparityMap::new(gt.len(), 1, gt).unwrap();
            let near = oracle_classify(&gt, lo);
            let far = oracle_classify(&gt, hi);
            for (x, y) in near.confidences().iter().zip(far.confidences()) {
                prop_assert!(x >= y);
            }
        }

        #[test]
        fn oracle_cdf_identity(
            gt in proptest::collection::vec(proptest::option::weighted(0.9, 0u8..30), 1..60),
            plane in 0.0f64..30.0,
        ) {
            let vals: Vec<f32> = gt.iter().map(|g| g.map_or(f32::NAN, f32::from)).collect();
            let gt = DisparityMap::new(vals.len(), 1, vals.clone()).unwrap();
            let c = oracle_classify(&gt, plane);
            let valid: Vec<f32> = vals.iter().copied().filter(|v| v.is_finite()).collect();
            prop_assume!(!valid.is_empty());
            let at_or_below = valid.iter().filter(|&&v| f64::from(v) <= plane).count();
            let behind: f64 = c
                .confidences()
                .iter()
                .zip(c.validity())
                .filter(|(_, &ok)| ok)
                .map(|(&v, _)| 1.0 - f64::from(v))
                .sum();
            prop_assert_eq!(behind / valid.len() as f64, at_or_below as f64 / valid.len() as f64);
        }
    }
}
