//! End-point error, bad-pixel rate and mean IOU.

use std::fmt;

use crate::error::{Error, Result};
use crate::imgio::{DisparityMap, LabelMap, Mask};

fn check_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Absolute errors over pixels valid in both maps and selected by `mask`,
/// in raster order.
fn abs_errors(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<Vec<f64>> {
    check_dims("prediction and ground truth", pred.dimensions(), gt.dimensions())?;
    if let Some(m) = mask {
        check_dims("mask", m.dimensions(), gt.dimensions())?;
    }
    let errors: Vec<f64> = pred
        .values()
        .iter()
        .zip(gt.values())
        .enumerate()
        .filter(|&(i, (p, g))| {
            p.is_finite() && g.is_finite() && mask.is_none_or(|m| m.bits()[i])
        })
        .map(|(_, (p, g))| (f64::from(*p) - f64::from(*g)).abs())
        .collect();
    if errors.is_empty() {
        return Err(Error::NoValidPixels);
    }
    Ok(errors)
}

/// Mean absolute disparity error.
pub fn epe(pred: &DisparityMap, gt: &DisparityMap, mask: Option<&Mask>) -> Result<f64> {
    let e = abs_errors(pred, gt, mask)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Fraction of pixels whose error exceeds `threshold`.
pub fn bad_pixel_rate(
    pred: &DisparityMap,
    gt: &DisparityMap,
    mask: Option<&Mask>,
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", format!("must be > 0, got {threshold}")));
    }
    let e = abs_errors(pred, gt, mask)?;
    Ok(e.iter().filter(|&&v| v > threshold).count() as f64 / e.len() as f64)
}

/// Per-class intersection and union counts, accumulable across images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IouCounts {
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
}

impl IouCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            intersection: vec![0; classes],
            union: vec![0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.intersection.len()
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap, mask: Option<&Mask>) -> Result<()> {
        check_dims("prediction and ground truth", pred.dimensions(), gt.dimensions())?;
        if let Some(m) = mask {
            check_dims("mask", m.dimensions(), gt.dimensions())?;
        }
        let k = self.classes();
        for map in [pred, gt] {
            if map.classes() as usize > k {
                return Err(Error::param(
                    "classes",
                    format!("label map has {} classes, expected at most {k}", map.classes()),
                ));
            }
        }
        for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
            if mask.is_some_and(|m| !m.bits()[i]) {
                continue;
            }
            let (p, g) = (p as usize, g as usize);
            if p == g {
                self.intersection[p] += 1;
                self.union[p] += 1;
            } else {
                self.union[p] += 1;
                self.union[g] += 1;
            }
        }
        Ok(())
    }

    /// IOU per class; `None` for classes absent from both maps.
    pub fn per_class(&self) -> Vec<Option<f64>> {
        self.intersection
            .iter()
            .zip(&self.union)
            .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
            .collect()
    }

    /// Mean over present classes.
    pub fn mean(&self) -> Result<f64> {
        let present: Vec<f64> = self.per_class().into_iter().flatten().collect();
        if present.is_empty() {
            return Err(Error::NoClassPresent);
        }
        Ok(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Mean IOU over the classes present in either map, and the per-class list.
pub fn miou(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<(f64, Vec<Option<f64>>)> {
    miou_masked(pred, gt, classes, None)
}

pub fn miou_masked(
    pred: &LabelMap,
    gt: &LabelMap,
    classes: usize,
    mask: Option<&Mask>,
) -> Result<(f64, Vec<Option<f64>>)> {
    let mut counts = IouCounts::new(classes);
    counts.add(pred, gt, mask)?;
    Ok((counts.mean()?, counts.per_class()))
}

/// Summary of one evaluation. `miou` is the mean of per-image scores;
/// `miou_global` pools intersections and unions over all images first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub epe: Option<f64>,
    pub bad_pixel_rate: Option<f64>,
    pub miou: Option<f64>,
    pub miou_global: Option<f64>,
    pub per_class_iou: Vec<Option<f64>>,
    pub valid_pixels: usize,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "epe,bad_pixel_rate,miou,miou_global,valid_pixels,per_class_iou";

    /// Per-class IOU values are joined with `;`, empty for absent classes.
    pub fn csv_row(&self) -> String {
        let classes: Vec<String> = self.per_class_iou.iter().map(|&v| cell(v)).collect();
        format!(
            "{},{},{},{},{},{}",
            cell(self.epe),
            cell(self.bad_pixel_rate),
            cell(self.miou),
            cell(self.miou_global),
            self.valid_pixels,
            classes.join(";")
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let na = |v: Option<f64>, pct: bool| match v {
            None => "n/a".to_owned(),
            Some(v) if pct => format!("{:.2}%", 100.0 * v),
            Some(v) => format!("{v:.4}"),
        };
        writeln!(f, "valid pixels   {}", self.valid_pixels)?;
        writeln!(f, "EPE            {}", na(self.epe, false))?;
        writeln!(f, "bad pixels >3  {}", na(self.bad_pixel_rate, true))?;
        writeln!(f, "mIOU           {}", na(self.miou, false))?;
        writeln!(f, "mIOU (global)  {}", na(self.miou_global, false))?;
        for (k, v) in self.per_class_iou.iter().enumerate() {
            writeln!(f, "  IOU[{k}]       {}", na(*v, false))?;
        }
        Ok(())
    }
}
