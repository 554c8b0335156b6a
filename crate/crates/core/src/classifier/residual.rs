//! Soft residual-direction classifier.
//!
//! After warping the right image onto plane `d_i`, a point in front of the
//! plane (true disparity above `d_i`) matches at a leftward offset in the warped
//! image and a point behind it at a rightward one. The classifier scores every
//! offset `delta` in `-K..=K`, turns costs into weights `exp(-c / tau)` and
//! reports the leftward mass, with the zero offset split evenly.

use rayon::prelude::*;

use super::aggregate::{box_sum, box_sum_u32, BoxScratch, INVALID_U32};
use super::census::{hamming, CensusImage};
use super::{ClassifierConfig, ConfidenceMap, CostKind, PlaneClassifier};
use crate::error::{Error, Result};
use crate::geometry::warp_right_padded;
use crate::imgio::StereoPair;

/// NCC windows with variance below this are treated as flat.
const FLAT_VARIANCE: f64 = 1e-10;

enum LeftFeatures {
    Census(CensusImage),
    Ncc {
        sum: Vec<Option<f64>>,
        sum_sq: Vec<Option<f64>>,
    },
}

/// Classical front/behind classifier bound to one stereo pair. Left-image
/// descriptors are computed once and shared by every plane.
pub struct ResidualClassifier<'a> {
    pair: &'a StereoPair,
    cfg: ClassifierConfig,
    left: LeftFeatures,
}

impl<'a> ResidualClassifier<'a> {
    pub fn new(pair: &'a StereoPair, cfg: &ClassifierConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = pair.dimensions();
        let support = match cfg.cost {
            CostKind::Census => cfg.desc_radius + cfg.agg_radius,
            CostKind::Ncc => cfg.agg_radius,
        };
        let window = 2 * support + 1;
        if window > w || window > h {
            return Err(Error::WindowTooLarge {
                window,
                width: w,
                height: h,
            });
        }
        let left = match cfg.cost {
            CostKind::Census => {
                LeftFeatures::Census(CensusImage::compute(pair.left(), None, cfg.desc_radius))
            }
            CostKind::Ncc => {
                let px: Vec<f64> = pair.left().pixels().iter().map(|&v| f64::from(v)).collect();
                let sq: Vec<f64> = px.iter().map(|v| v * v).collect();
                let all = vec![true; w * h];
                let mut scratch = BoxScratch::default();
                let mut sum = vec![None; w * h];
                let mut sum_sq = vec![None; w * h];
                box_sum(&px, &all, w, h, cfg.agg_radius, &mut scratch, &mut sum);
                box_sum(&sq, &all, w, h, cfg.agg_radius, &mut scratch, &mut sum_sq);
                LeftFeatures::Ncc { sum, sum_sq }
            }
        };
        Ok(Self {
            pair,
            cfg: cfg.clone(),
            left,
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    /// Aggregated matching cost for every offset, laid out offset-major with
    /// `f32::INFINITY` marking excluded offsets.
    fn cost_volume(&self, d: f64) -> Result<Vec<f32>> {
        let (w, h) = self.pair.dimensions();
        let n = w * h;
        let k = self.cfg.search_extent as isize;
        let offsets = 2 * self.cfg.search_extent + 1;
        let a = self.cfg.agg_radius;
        // canvas extends K columns past the right edge
        let ww = w + self.cfg.search_extent;
        let warped = warp_right_padded(self.pair.right(), d, self.cfg.search_extent)?;

        let mut volume = vec![f32::INFINITY; offsets * n];

        match &self.left {
            LeftFeatures::Census(lc) => {
                let wc = CensusImage::compute(
                    &warped.image,
                    Some(&warped.validity),
                    self.cfg.desc_radius,
                );
                let mut costs = vec![INVALID_U32; n];
                let mut rows = Vec::new();
                for (oi, delta) in (-k..=k).enumerate() {
                    costs.par_chunks_mut(w).enumerate().for_each(|(y, cost_row)| {
                        let base = y * w;
                        for (x, c) in cost_row.iter_mut().enumerate() {
                            let xs = x as isize + delta;
                            let j = (y * ww).wrapping_add_signed(xs);
                            *c = if xs >= 0 && lc.valid[base + x] && wc.valid[j] {
                                hamming(lc.codes[base + x], wc.codes[j])
                            } else {
                                INVALID_U32
                            };
                        }
                    });
                    box_sum_u32(&costs, w, h, a, &mut rows, &mut volume[oi * n..(oi + 1) * n]);
                }
            }
            LeftFeatures::Ncc { sum: l_sum, sum_sq: l_sq } => {
                let wpx: Vec<f64> = warped.image.pixels().iter().map(|&v| f64::from(v)).collect();
                let wsq: Vec<f64> = wpx.iter().map(|v| v * v).collect();
                let wvalid = warped.validity.bits();
                let mut scratch = BoxScratch::default();
                let mut w_sum = vec![None; ww * h];
                let mut w_sq = vec![None; ww * h];
                box_sum(&wpx, wvalid, ww, h, a, &mut scratch, &mut w_sum);
                box_sum(&wsq, wvalid, ww, h, a, &mut scratch, &mut w_sq);
                let lpx = self.pair.left().pixels();
                let count = ((2 * a + 1) * (2 * a + 1)) as f64;
                let mut pair_cost = vec![0.0f64; n];
                let mut pair_ok = vec![false; n];
                let mut window = vec![None; n];

                for (oi, delta) in (-k..=k).enumerate() {
                    pair_cost
                        .par_chunks_mut(w)
                        .zip(pair_ok.par_chunks_mut(w))
                        .enumerate()
                        .for_each(|(y, (cost_row, ok_row))| {
                            let base = y * w;
                            for x in 0..w {
                                let xs = x as isize + delta;
                                let ok = xs >= 0 && wvalid[y * ww + xs as usize];
                                ok_row[x] = ok;
                                cost_row[x] = if ok {
                                    f64::from(lpx[base + x]) * wpx[y * ww + xs as usize]
                                } else {
                                    0.0
                                };
                            }
                        });
                    box_sum(&pair_cost, &pair_ok, w, h, a, &mut scratch, &mut window);
                    let slot = &mut volume[oi * n..(oi + 1) * n];
                    for (i, dst) in slot.iter_mut().enumerate() {
                        let Some(cross) = window[i] else { continue };
                        let (x, y) = (i % w, i / w);
                        let xs = x as isize + delta;
                        if xs < 0 {
                            continue;
                        }
                        let j = y * ww + xs as usize;
                        let (Some(ls), Some(lq), Some(ws), Some(wq)) =
                            (l_sum[i], l_sq[i], w_sum[j], w_sq[j])
                        else {
                            continue;
                        };
                        let var_l = lq - ls * ls / count;
                        let var_w = wq - ws * ws / count;
                        if var_l <= FLAT_VARIANCE || var_w <= FLAT_VARIANCE {
                            continue;
                        }
                        let ncc = ((cross - ls * ws / count) / (var_l * var_w).sqrt()).clamp(-1.0, 1.0);
                        *dst = (1.0 - ncc) as f32;
                    }
                }
            }
        }
        Ok(volume)
    }
}

#[inline]
fn weight(c: f32, best: f32, temperature: f64) -> f64 {
    if c.is_finite() {
        (-(f64::from(c) - f64::from(best)) / temperature).exp()
    } else {
        0.0
    }
}

/// Direction vote for one pixel given its per-offset costs (index `K` is the
/// zero offset). Returns `None` when every offset is excluded.
///
/// Left and right masses are accumulated outward from the center in the same
/// order, so mirror-symmetric costs give exactly 0.5.
pub fn direction_vote(costs: impl Fn(usize) -> f32, extent: usize, temperature: f64) -> Option<f32> {
    let mut best = f32::INFINITY;
    for i in 0..=2 * extent {
        best = best.min(costs(i));
    }
    if !best.is_finite() {
        return None;
    }
    let zero = weight(costs(extent), best, temperature);
    let (mut left, mut right) = (0.0f64, 0.0f64);
    for m in 1..=extent {
        left += weight(costs(extent - m), best, temperature);
        right += weight(costs(extent + m), best, temperature);
    }
    let total = (left + right) + zero;
    Some(((left + 0.5 * zero) / total) as f32)
}

/// [`direction_vote`] for every pixel of an offset-major volume, swept one
/// offset at a time. Arithmetic matches the per-pixel form exactly.
fn vote_volume(volume: &[f32], w: usize, h: usize, extent: usize, tau: f64) -> ConfidenceMap {
    let n = w * h;
    let mut conf = vec![0.0f32; n];
    let mut valid = vec![false; n];
    conf.par_chunks_mut(w)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (c_row, v_row))| {
            let slice = |o: usize| &volume[o * n + y * w..o * n + (y + 1) * w];
            let mut best = slice(0).to_vec();
            for o in 1..=2 * extent {
                for (b, &c) in best.iter_mut().zip(slice(o)) {
                    *b = b.min(c);
                }
            }
            let zero: Vec<f64> = slice(extent)
                .iter()
                .zip(&best)
                .map(|(&c, &b)| weight(c, b, tau))
                .collect();
            let mut left = vec![0.0f64; w];
            let mut right = vec![0.0f64; w];
            for m in 1..=extent {
                for (x, (&cl, &cr)) in slice(extent - m).iter().zip(slice(extent + m)).enumerate() {
                    left[x] += weight(cl, best[x], tau);
                    right[x] += weight(cr, best[x], tau);
                }
            }
            for x in 0..w {
                if best[x].is_finite() {
                    let total = (left[x] + right[x]) + zero[x];
                    c_row[x] = ((left[x] + 0.5 * zero[x]) / total) as f32;
                    v_row[x] = true;
                }
            }
        });
    ConfidenceMap::from_raw(w, h, conf, valid)
}

impl PlaneClassifier for ResidualClassifier<'_> {
    fn dimensions(&self) -> (usize, usize) {
        self.pair.dimensions()
    }

    fn classify(&self, d: f64) -> Result<ConfidenceMap> {
        let (w, h) = self.pair.dimensions();
        let volume = self.cost_volume(d)?;
        Ok(vote_volume(&volume, w, h, self.cfg.search_extent, self.cfg.temperature))
    }
}

/// Confidence that each pixel lies in front of the plane at disparity `d`.
pub fn classify_plane(pair: &StereoPair, d: f64, cfg: &ClassifierConfig) -> Result<ConfidenceMap> {
    ResidualClassifier::new(pair, cfg)?.classify(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::GrayImage;

    #[test]
    fn symmetric_costs_vote_exactly_half() {
        let costs = [9.0f32, 3.0, 7.0, 1.5, 7.0, 3.0, 9.0];
        assert_eq!(direction_vote(|i| costs[i], 3, 4.0), Some(0.5));
        let costs = [0.1f32, 0.37, 0.2, 0.37, 0.1];
        assert_eq!(direction_vote(|i| costs[i], 2, 0.1), Some(0.5));
    }

    #[test]
    fn leftward_minimum_votes_front() {
        let costs = [10.0f32, 0.0, 10.0, 10.0, 10.0];
        let c = direction_vote(|i| costs[i], 2, 1.0).unwrap();
        assert!(c > 0.99);
        let c = direction_vote(|i| costs[4 - i], 2, 1.0).unwrap();
        assert!(c < 0.01);
    }

    #[test]
    fn all_excluded_is_invalid() {
        assert_eq!(direction_vote(|_| f32::INFINITY, 2, 1.0), None);
        // a single surviving offset decides alone
        let costs = [f32::INFINITY, f32::INFINITY, 5.0];
        assert_eq!(direction_vote(|i| costs[i], 1, 1.0), Some(0.0));
    }

    #[test]
    fn swept_vote_matches_per_pixel_vote() {
        let (w, h, k) = (7, 3, 4);
        let n = w * h;
        let offsets = 2 * k + 1;
        let volume: Vec<f32> = (0..offsets * n)
            .map(|i| match (i * 7919) % 23 {
                0 | 1 => f32::INFINITY,
                v => v as f32 * 0.37,
            })
            .collect();
        let swept = vote_volume(&volume, w, h, k, 1.5);
        for i in 0..n {
            let single = direction_vote(|o| volume[o * n + i], k, 1.5);
            assert_eq!(swept.get(i % w, i / w), single);
        }
    }

    #[test]
    fn window_larger_than_image_is_an_error() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x + y) % 2) as f32);
        let pair = StereoPair::new(img.clone(), img).unwrap();
        let cfg = ClassifierConfig::default(); // support 2 * (3 + 2) + 1 = 11
        assert!(matches!(
            classify_plane(&pair, 0.0, &cfg),
            Err(Error::WindowTooLarge { window: 11, .. })
        ));
    }

    #[test]
    fn flat_ncc_patches_are_excluded() {
        let img = GrayImage::from_fn(16, 8, |_, _| 0.5);
        let pair = StereoPair::new(img.clone(), img).unwrap();
        let cfg = ClassifierConfig::with_cost(CostKind::Ncc);
        let c = classify_plane(&pair, 1.0, &cfg).unwrap();
        assert_eq!(c.valid_count(), 0);
    }
}
