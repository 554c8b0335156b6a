//! Confidence volumes and the depth products derived from them: binary,
//! quantized, selective and full continuous disparity.

use rayon::prelude::*;

use crate::classifier::{
    oracle_classify, smooth_confidence, ClassifierConfig, ConfidenceMap, PlaneClassifier,
    ResidualClassifier,
};
use crate::error::{Error, Result};
use crate::geometry::{uniform_schedule, PlaneSchedule};
use crate::imgio::{DepthLabel, DisparityMap, LabelMap, Mask, StereoPair};

/// One confidence slice per plane, in schedule order.
#[derive(Debug, Clone)]
pub struct ConfidenceVolume {
    schedule: PlaneSchedule,
    slices: Vec<ConfidenceMap>,
}

impl ConfidenceVolume {
    pub fn new(schedule: PlaneSchedule, slices: Vec<ConfidenceMap>) -> Result<Self> {
        if slices.len() != schedule.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} slices for {} planes",
                slices.len(),
                schedule.len()
            )));
        }
        if slices.windows(2).any(|s| s[0].dimensions() != s[1].dimensions()) {
            return Err(Error::DimensionMismatch("slices differ in size".into()));
        }
        Ok(Self { schedule, slices })
    }

    pub fn schedule(&self) -> &PlaneSchedule {
        &self.schedule
    }

    pub fn slices(&self) -> &[ConfidenceMap] {
        &self.slices
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.slices[0].dimensions()
    }

    /// Confidence across all planes at pixel index `i`, or `None` if any slice
    /// is invalid there.
    pub fn curve(&self, i: usize, out: &mut Vec<f64>) -> bool {
        out.clear();
        for s in &self.slices {
            if !s.validity()[i] {
                return false;
            }
            out.push(f64::from(s.confidences()[i]));
        }
        true
    }
}

/// Slice `i` classifies the plane `d_i`; planes run in ascending order so the
/// result does not depend on scheduling.
pub fn build_volume(
    pair: &StereoPair,
    schedule: &PlaneSchedule,
    cfg: &ClassifierConfig,
) -> Result<ConfidenceVolume> {
    let classifier = ResidualClassifier::new(pair, cfg)?;
    build_volume_with(&classifier, schedule, cfg.smooth_radius)
}

pub fn build_volume_with(
    classifier: &dyn PlaneClassifier,
    schedule: &PlaneSchedule,
    smooth_radius: usize,
) -> Result<ConfidenceVolume> {
    let slices = schedule
        .disparities()
        .iter()
        .map(|&d| {
            let c = classifier.classify(d)?;
            Ok(if smooth_radius > 0 {
                smooth_confidence(&c, smooth_radius)
            } else {
                c
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ConfidenceVolume::new(schedule.clone(), slices)
}

pub fn oracle_volume(gt: &DisparityMap, schedule: &PlaneSchedule) -> ConfidenceVolume {
    let slices = schedule
        .disparities()
        .iter()
        .map(|&d| oracle_classify(gt, d))
        .collect();
    ConfidenceVolume {
        schedule: schedule.clone(),
        slices,
    }
}

/// Integration rule for the area under the confidence curve. All rules add
/// the `d_0` offset so selective ranges integrate from their far edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AucRule {
    #[default]
    Trapezoid,
    LeftRiemann,
    RightRiemann,
}

/// `d_0 + integral of C over [d_0, d_N]`, clamped to `[d_0, d_N]`.
pub fn auc_of_curve(planes: &[f64], conf: &[f64], rule: AucRule) -> f64 {
    debug_assert_eq!(planes.len(), conf.len());
    let mut area = 0.0;
    for i in 1..planes.len() {
        let step = planes[i] - planes[i - 1];
        let height = match rule {
            AucRule::Trapezoid => 0.5 * (conf[i - 1] + conf[i]),
            AucRule::LeftRiemann => conf[i - 1],
            AucRule::RightRiemann => conf[i],
        };
        area += height * step;
    }
    let (lo, hi) = (planes[0], planes[planes.len() - 1]);
    (lo + area).clamp(lo, hi)
}

pub fn auc_disparity(vol: &ConfidenceVolume) -> Result<DisparityMap> {
    auc_disparity_with(vol, AucRule::Trapezoid)
}

pub fn auc_disparity_with(vol: &ConfidenceVolume, rule: AucRule) -> Result<DisparityMap> {
    if vol.schedule.len() < 2 {
        return Err(Error::TooFewPlanes(vol.schedule.len()));
    }
    let (w, h) = vol.dimensions();
    let planes = vol.schedule.disparities();
    let mut out = vec![DisparityMap::INVALID; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut curve = Vec::with_capacity(planes.len());
        for (x, o) in row.iter_mut().enumerate() {
            if vol.curve(y * w + x, &mut curve) {
                *o = auc_of_curve(planes, &curve, rule) as f32;
            }
        }
    });
    Ok(DisparityMap::from_raw(w, h, out))
}

/// `N` planes split `[0, inf)` into `N + 1` bins; bin `k` covers
/// `(edge_k, edge_{k+1}]` with `edge_0 = 0` and `edge_{N+1} = inf`.
#[derive(Debug, Clone)]
pub struct QuantizedDepth {
    pub bins: LabelMap,
    pub centers: DisparityMap,
    /// `[0, d_0, .., d_{N-1}, inf]`.
    pub edges: Vec<f64>,
    /// Closes the last bin when computing its center.
    pub scene_max: f64,
    pub valid: Mask,
}

impl QuantizedDepth {
    pub fn center_of(&self, bin: usize) -> f64 {
        let hi = if bin + 1 == self.edges.len() - 1 {
            self.scene_max
        } else {
            self.edges[bin + 1]
        };
        0.5 * (self.edges[bin] + hi)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuantizeOptions {
    /// Replace the confidence curve by its running minimum along increasing
    /// disparity before differencing.
    pub isotonic: bool,
}

/// Bin probabilities before clamping: the curve is extended with 1 at
/// disparity 0 and 0 at infinity, then differenced. They sum to 1.
pub fn bin_probabilities(conf: &[f64]) -> Vec<f64> {
    let mut probs = Vec::with_capacity(conf.len() + 1);
    let mut prev = 1.0;
    for &c in conf {
        probs.push(prev - c);
        prev = c;
    }
    probs.push(prev);
    probs
}

/// Most probable bin, lowest index (farthest) on ties; negative masses count as 0.
pub fn most_probable_bin(probs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        if p > best_p {
            best = k;
            best_p = p;
        }
    }
    best
}

pub fn quantized_disparity(vol: &ConfidenceVolume, scene_max: f64) -> Result<QuantizedDepth> {
    quantized_disparity_with(vol, scene_max, QuantizeOptions::default())
}

pub fn quantized_disparity_with(
    vol: &ConfidenceVolume,
    scene_max: f64,
    opts: QuantizeOptions,
) -> Result<QuantizedDepth> {
    let planes = vol.schedule.disparities();
    if !(scene_max.is_finite() && scene_max > vol.schedule.last()) {
        return Err(Error::param(
            "scene_max",
            format!("must exceed the nearest plane {}, got {scene_max}", vol.schedule.last()),
        ));
    }
    if vol.schedule.first() <= 0.0 {
        return Err(Error::param(
            "schedule",
            "quantization planes must lie above the zero-disparity plane",
        ));
    }
    let mut edges = Vec::with_capacity(planes.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(planes);
    edges.push(f64::INFINITY);
    let classes = u16::try_from(planes.len() + 1)
        .map_err(|_| Error::param("schedule", "too many planes for a label map"))?;

    let (w, h) = vol.dimensions();
    let mut result = QuantizedDepth {
        bins: LabelMap::from_raw(w, h, classes, vec![0; w * h]),
        centers: DisparityMap::from_raw(w, h, vec![DisparityMap::INVALID; w * h]),
        edges,
        scene_max,
        valid: Mask::filled(w, h, false),
    };
    let centers_of: Vec<f32> = (0..planes.len() + 1)
        .map(|k| result.center_of(k) as f32)
        .collect();

    let mut bins = vec![0u16; w * h];
    let mut centers = vec![DisparityMap::INVALID; w * h];
    let mut valid = vec![false; w * h];
    bins.par_chunks_mut(w)
        .zip(centers.par_chunks_mut(w))
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((b_row, c_row), v_row))| {
            let mut curve = Vec::with_capacity(planes.len());
            for x in 0..w {
                if !vol.curve(y * w + x, &mut curve) {
                    continue;
                }
                if opts.isotonic {
                    for j in 1..curve.len() {
                        curve[j] = curve[j].min(curve[j - 1]);
                    }
                }
                let k = most_probable_bin(&bin_probabilities(&curve));
                b_row[x] = k as u16;
                c_row[x] = centers_of[k];
                v_row[x] = true;
            }
        });
    result.bins = LabelMap::from_raw(w, h, classes, bins);
    result.centers = DisparityMap::from_raw(w, h, centers);
    result.valid = Mask::from_raw(w, h, valid);
    Ok(result)
}

/// Bins ground truth by the schedule's edges: the label is `#{d_i < gt}`.
/// Invalid ground truth gets label 0 and is cleared in the returned mask.
pub fn bin_ground_truth(gt: &DisparityMap, schedule: &PlaneSchedule) -> (LabelMap, Mask) {
    let planes = schedule.disparities();
    let (w, h) = gt.dimensions();
    let mut valid = vec![false; w * h];
    let labels = gt
        .values()
        .iter()
        .zip(valid.iter_mut())
        .map(|(&g, ok)| {
            if !g.is_finite() {
                return 0;
            }
            *ok = true;
            planes.partition_point(|&d| d < f64::from(g)) as u16
        })
        .collect();
    (
        LabelMap::from_raw(w, h, planes.len() as u16 + 1, labels),
        Mask::from_raw(w, h, valid),
    )
}

#[derive(Debug, Clone)]
pub struct SelectiveDepth {
    /// Valid only for IN_RANGE pixels.
    pub disparity: DisparityMap,
    pub labels: LabelMap,
    pub valid: Mask,
}

/// FRONT when the nearest plane still reads in front, BEHIND when the farthest
/// plane already reads behind, otherwise IN_RANGE with the AUC disparity.
pub fn selective_disparity(vol: &ConfidenceVolume) -> Result<SelectiveDepth> {
    selective_disparity_with(vol, AucRule::Trapezoid)
}

pub fn selective_disparity_with(vol: &ConfidenceVolume, rule: AucRule) -> Result<SelectiveDepth> {
    if vol.schedule.len() < 2 {
        return Err(Error::TooFewPlanes(vol.schedule.len()));
    }
    let (w, h) = vol.dimensions();
    let planes = vol.schedule.disparities();
    let mut disparity = vec![DisparityMap::INVALID; w * h];
    let mut labels = vec![DepthLabel::Behind.code(); w * h];
    let mut valid = vec![false; w * h];
    disparity
        .par_chunks_mut(w)
        .zip(labels.par_chunks_mut(w))
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((d_row, l_row), v_row))| {
            let mut curve = Vec::with_capacity(planes.len());
            for x in 0..w {
                if !vol.curve(y * w + x, &mut curve) {
                    continue;
                }
                v_row[x] = true;
                let label = if curve[curve.len() - 1] > 0.5 {
                    DepthLabel::Front
                } else if curve[0] < 0.5 {
                    DepthLabel::Behind
                } else {
                    d_row[x] = auc_of_curve(planes, &curve, rule) as f32;
                    DepthLabel::InRange
                };
                l_row[x] = label.code();
            }
        });
    Ok(SelectiveDepth {
        disparity: DisparityMap::from_raw(w, h, disparity),
        labels: LabelMap::from_raw(w, h, 3, labels),
        valid: Mask::from_raw(w, h, valid),
    })
}

/// AUC disparity over `count` planes spanning `[0, d_max]`.
pub fn full_disparity(
    pair: &StereoPair,
    cfg: &ClassifierConfig,
    d_max: f64,
    count: usize,
) -> Result<DisparityMap> {
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(Error::param("d_max", format!("must be positive, got {d_max}")));
    }
    let schedule = uniform_schedule(0.0, d_max, count)?;
    auc_disparity(&build_volume(pair, &schedule, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column_volume(planes: &[f64], curves: &[Vec<f32>]) -> ConfidenceVolume {
        // one pixel per curve, laid out in a row
        let schedule = PlaneSchedule::new(planes.to_vec()).unwrap();
        let slices = (0..planes.len())
            .map(|j| {
                let vals: Vec<f32> = curves.iter().map(|c| c[j]).collect();
                ConfidenceMap::new(curves.len(), 1, vals, vec![true; curves.len()]).unwrap()
            })
            .collect();
        ConfidenceVolume::new(schedule, slices).unwrap()
    }

    const UNIT: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

    #[test]
    fn symmetric_ramp_is_exact() {
        let vol = column_volume(&UNIT, &[vec![1.0, 0.75, 0.5, 0.25, 0.0]]);
        assert_eq!(auc_disparity(&vol).unwrap().get(0, 0), Some(2.0));
    }

    #[test]
    fn constant_curves_hit_range_ends() {
        let vol = column_volume(&UNIT, &[vec![1.0; 5], vec![0.0; 5]]);
        let d = auc_disparity(&vol).unwrap();
        assert_eq!(d.get(0, 0), Some(4.0));
        assert_eq!(d.get(1, 0), Some(0.0));
    }

    #[test]
    fn oracle_step_is_half_a_step_low() {
        let gt = DisparityMap::filled(1, 1, 3.0).unwrap();
        let vol = oracle_volume(&gt, &PlaneSchedule::new(UNIT.to_vec()).unwrap());
        assert_eq!(auc_disparity(&vol).unwrap().get(0, 0), Some(2.5));
    }

    #[test]
    fn riemann_rules() {
        let c = [1.0, 1.0, 1.0, 0.0, 0.0];
        assert_eq!(auc_of_curve(&UNIT, &c, AucRule::LeftRiemann), 3.0);
        assert_eq!(auc_of_curve(&UNIT, &c, AucRule::RightRiemann), 2.0);
        assert_eq!(auc_of_curve(&UNIT, &c, AucRule::Trapezoid), 2.5);
    }

    #[test]
    fn single_plane_regression_is_an_error() {
        let vol = column_volume(&[5.0], &[vec![1.0]]);
        assert!(matches!(auc_disparity(&vol), Err(Error::TooFewPlanes(1))));
        assert!(selective_disparity(&vol).is_err());
        // but it still binarizes
        let labels = crate::classifier::binarize(&vol.slices()[0]);
        assert_eq!(labels.labels(), &[DepthLabel::Front.code()]);
    }

    #[test]
    fn invalid_slice_value_invalidates_pixel() {
        let schedule = PlaneSchedule::new(vec![1.0, 2.0]).unwrap();
        let a = ConfidenceMap::new(2, 1, vec![1.0, 1.0], vec![true, true]).unwrap();
        let b = ConfidenceMap::new(2, 1, vec![0.0, 0.0], vec![true, false]).unwrap();
        let vol = ConfidenceVolume::new(schedule, vec![a, b]).unwrap();
        let d = auc_disparity(&vol).unwrap();
        assert_eq!(d.get(0, 0), Some(1.5));
        assert_eq!(d.get(1, 0), None);
    }

    #[test]
    fn quantized_examples() {
        let vol = column_volume(&[64.0, 128.0], &[vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(bin_probabilities(&[1.0, 0.0]), vec![0.0, 1.0, 0.0]);
        let q = quantized_disparity(&vol, 192.0).unwrap();
        assert_eq!(q.bins.labels(), &[1, 2]);
        assert_eq!(q.centers.values(), &[96.0, 160.0]);
        assert_eq!(q.bins.classes(), 3);
        assert_eq!(q.center_of(0), 32.0);
    }

    #[test]
    fn quantized_ties_go_farther_and_negatives_clamp() {
        // p = [0.5, 0.5, 0] -> tie resolves to bin 0
        let vol = column_volume(&[10.0, 20.0], &[vec![0.5, 0.0], vec![0.2, 0.9]]);
        let q = quantized_disparity(&vol, 30.0).unwrap();
        // second pixel: p = [0.8, -0.7, 0.9] -> bin 2
        assert_eq!(q.bins.labels(), &[0, 2]);
        // isotonic: [0.2, 0.2] -> p = [0.8, 0, 0.2] -> bin 0
        let q = quantized_disparity_with(&vol, 30.0, QuantizeOptions { isotonic: true }).unwrap();
        assert_eq!(q.bins.labels(), &[0, 0]);
    }

    #[test]
    fn quantized_preconditions() {
        let vol = column_volume(&[10.0, 20.0], &[vec![0.5, 0.0]]);
        assert!(quantized_disparity(&vol, 20.0).is_err());
        assert!(quantized_disparity(&vol, f64::INFINITY).is_err());
        let vol = column_volume(&[0.0, 20.0], &[vec![0.5, 0.0]]);
        assert!(quantized_disparity(&vol, 40.0).is_err());
    }

    #[test]
    fn selective_labels() {
        let planes: Vec<f64> = (18..=42).map(f64::from).collect();
        let schedule = PlaneSchedule::new(planes).unwrap();
        let gt = DisparityMap::new(4, 1, vec![50.0, 10.0, 30.0, 18.0]).unwrap();
        let s = selective_disparity(&oracle_volume(&gt, &schedule)).unwrap();
        use DepthLabel::*;
        assert_eq!(
            s.labels.labels(),
            &[Front.code(), Behind.code(), InRange.code(), Behind.code()]
        );
        let d = s.disparity.get(2, 0).unwrap();
        assert!((d - 30.0).abs() <= 0.5);
        assert_eq!(s.disparity.get(0, 0), None);
    }

    #[test]
    fn ground_truth_binning() {
        let schedule = PlaneSchedule::new(vec![15.0, 30.0, 45.0]).unwrap();
        let gt = DisparityMap::new(6, 1, vec![0.0, 15.0, 15.5, 30.0, 60.0, f32::NAN]).unwrap();
        let (labels, valid) = bin_ground_truth(&gt, &schedule);
        assert_eq!(labels.labels(), &[0, 0, 1, 1, 3, 0]);
        assert_eq!(valid.count(), 5);
    }

    fn curve_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..=1.0, n)
    }

    fn planes_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..5.0, 2..12).prop_map(|steps| {
            let mut acc = 0.0;
            steps
                .iter()
                .map(|s| {
                    acc += s;
                    acc
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn auc_stays_within_range(planes in planes_strategy(), seed in curve_strategy(12)) {
            let c = &seed[..planes.len()];
            for rule in [AucRule::Trapezoid, AucRule::LeftRiemann, AucRule::RightRiemann] {
                let d = auc_of_curve(&planes, c, rule);
                prop_assert!(d >= planes[0] && d <= planes[planes.len() - 1]);
            }
        }

        #[test]
        fn auc_is_monotone(planes in planes_strategy(), a in curve_strategy(12), b in curve_strategy(12)) {
            let n = planes.len();
            let hi: Vec<f64> = (0..n).map(|i| a[i].max(b[i])).collect();
            let lo: Vec<f64> = (0..n).map(|i| a[i].min(b[i])).collect();
            prop_assert!(auc_of_curve(&planes, &hi, AucRule::Trapezoid)
                >= auc_of_curve(&planes, &lo, AucRule::Trapezoid));
        }

        #[test]
        fn flipping_k_slices_moves_at_most_k_steps(
            gt in 0.0f64..20.0,
            flips in proptest::collection::btree_set(1usize..20, 0..6),
        ) {
            let planes: Vec<f64> = (0..=20).map(f64::from).collect();
            let step: Vec<f64> = planes.iter().map(|&d| if d < gt { 1.0 } else { 0.0 }).collect();
            let mut flipped = step.clone();
            for &i in &flips {
                flipped[i] = 1.0 - flipped[i];
            }
            let a = auc_of_curve(&planes, &step, AucRule::Trapezoid);
            let b = auc_of_curve(&planes, &flipped, AucRule::Trapezoid);
            prop_assert!((a - b).abs() <= flips.len() as f64 + 1e-12);
        }

        #[test]
        fn bin_mass_telescopes(c in proptest::collection::vec(0.0f32..=1.0, 1..40)) {
            let curve: Vec<f64> = c.iter().map(|&v| f64::from(v)).collect();
            let total: f64 = bin_probabilities(&curve).iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn oracle_volume_is_nonincreasing(
            gt in proptest::collection::vec(0.0f32..30.0, 1..30),
            planes in planes_strategy(),
        ) {
            let gt = DisparityMap::new(gt.len(), 1, gt).unwrap();
            let vol = oracle_volume(&gt, &PlaneSchedule::new(planes).unwrap());
            for pair in vol.slices().windows(2) {
                for (a, b) in pair[0].confidences().iter().zip(pair[1].confidences()) {
                    prop_assert!(a >= b);
                }
            }
        }

        #[test]
        fn oracle_quantization_matches_direct_binning(
            gt in proptest::collection::vec(0u8..64, 1..50),
            planes in planes_strategy(),
        ) {
            let vals: Vec<f32> = gt.iter().map(|&g| f32::from(g)).collect();
            let gt = DisparityMap::new(vals.len(), 1, vals.clone()).unwrap();
            let schedule = PlaneSchedule::new(planes.clone()).unwrap();
            let q = quantized_disparity(&oracle_volume(&gt, &schedule), planes[planes.len() - 1] + 10.0).unwrap();
            for (i, &g) in vals.iter().enumerate() {
                // independent linear scan over bin edges
                let mut expected = 0;
                for (k, &d) in planes.iter().enumerate() {
                    if f64::from(g) > d {
                        expected = k + 1;
                    }
                }
                prop_assert_eq!(q.bins.labels()[i] as usize, expected);
            }
        }
    }
}
