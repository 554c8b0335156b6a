//! Near-range selective depth guarded by a binary fence plane farther out.
//! When enough of the frame crosses the fence the range's far edge moves out
//! to the fence; it moves back after a run of quiet frames.

use crate::classifier::{
    binarize, smooth_confidence, ClassifierConfig, PlaneClassifier, ResidualClassifier,
};
use crate::config::KeyValues;
use crate::depthops::{build_volume_with, selective_disparity, SelectiveDepth};
use crate::error::{Error, Result};
use crate::geometry::uniform_schedule;
use crate::imgio::{DepthLabel, LabelMap, StereoPair};
use crate::synth::Rect;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Base range `(d_a, d_b)`; `d_a` is the far edge.
    pub range: (f64, f64),
    pub fence: f64,
    pub tau_on: f64,
    pub tau_off: f64,
    pub release_frames: usize,
    pub planes_per_range: usize,
    /// Restricts the fence statistic to a rectangle when set.
    pub roi: Option<Rect>,
}

impl AdaptiveConfig {
    /// Base range `[d_a, d_b]` with fence `d_f` and default thresholds.
    pub fn new(d_a: f64, d_b: f64, d_f: f64, planes_per_range: usize) -> Self {
        Self {
            range: (d_a, d_b),
            fence: d_f,
            tau_on: 0.02,
            tau_off: 0.005,
            release_frames: 5,
            planes_per_range,
            roi: None,
        }
    }

    pub fn d_a(&self) -> f64 {
        self.range.0
    }

    pub fn d_b(&self) -> f64 {
        self.range.1
    }

    pub fn validate(&self) -> Result<()> {
        let (d_a, d_b, d_f) = (self.d_a(), self.d_b(), self.fence);
        if !(d_f.is_finite() && d_a.is_finite() && d_b.is_finite()) {
            return Err(Error::param("range", "range and fence must be finite"));
        }
        if !(d_a < d_b) {
            return Err(Error::param("range", format!("need d_a < d_b, got {d_a}:{d_b}")));
        }
        if !(d_f >= 0.0 && d_f < d_a) {
            return Err(Error::param(
                "fence",
                format!("need 0 <= fence < {d_a}, got {d_f}"),
            ));
        }
        if !(self.tau_on > 0.0 && self.tau_on < 1.0) {
            return Err(Error::param("tau_on", format!("must lie in (0, 1), got {}", self.tau_on)));
        }
        if !(self.tau_off >= 0.0 && self.tau_off < self.tau_on) {
            return Err(Error::param(
                "tau_off",
                format!("must lie in [0, tau_on), got {}", self.tau_off),
            ));
        }
        if self.release_frames == 0 {
            return Err(Error::param("release_frames", "must be at least 1"));
        }
        if self.planes_per_range < 2 {
            return Err(Error::param("planes_per_range", "must be at least 2"));
        }
        Ok(())
    }

    /// Overrides from keys `tau_on`, `tau_off`, `release_frames` and
    /// `roi = x y width height`.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(v) = kv.take_parsed("tau_on")? {
            self.tau_on = v;
        }
        if let Some(v) = kv.take_parsed("tau_off")? {
            self.tau_off = v;
        }
        if let Some(v) = kv.take_parsed("release_frames")? {
            self.release_frames = v;
        }
        if let Some(e) = kv.take("roi") {
            let f: Vec<usize> = e
                .value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config {
                    line: e.line,
                    reason: format!("roi needs `x y width height`, got {:?}", e.value),
                })?;
            let [x, y, width, height] = f[..] else {
                return Err(Error::Config {
                    line: e.line,
                    reason: format!("roi needs `x y width height`, got {:?}", e.value),
                });
            };
            self.roi = Some(Rect {
                x,
                y,
                width,
                height,
            });
        }
        Ok(())
    }

    fn active_range(&self, extended: bool) -> (f64, f64) {
        if extended {
            (self.fence, self.d_b())
        } else {
            self.range
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdaptiveState {
    pub extended: bool,
    /// Consecutive quiet frames seen while extended.
    pub quiet_frames: usize,
}

#[derive(Debug, Clone)]
pub struct AdaptiveFrame {
    pub selective: SelectiveDepth,
    pub fence: LabelMap,
    pub fence_fraction: f64,
    /// Range the selective result was computed on.
    pub range: (f64, f64),
    pub state: AdaptiveState,
}

/// Advances the state machine by one frame.
pub fn adaptive_step(
    state: AdaptiveState,
    pair: &StereoPair,
    cfg_a: &AdaptiveConfig,
    cfg_c: &ClassifierConfig,
) -> Result<AdaptiveFrame> {
    let classifier = ResidualClassifier::new(pair, cfg_c)?;
    adaptive_step_with(state, &classifier, cfg_a, cfg_c.smooth_radius)
}

pub fn adaptive_step_with(
    state: AdaptiveState,
    classifier: &dyn PlaneClassifier,
    cfg: &AdaptiveConfig,
    smooth_radius: usize,
) -> Result<AdaptiveFrame> {
    cfg.validate()?;
    if state.quiet_frames > cfg.release_frames {
        return Err(Error::param("state", "quiet frame counter exceeds release_frames"));
    }
    let (w, h) = classifier.dimensions();
    if let Some(r) = cfg.roi {
        if r.width == 0 || r.height == 0 || r.x + r.width > w || r.y + r.height > h {
            return Err(Error::param("roi", "rectangle must be nonempty and inside the frame"));
        }
    }

    let mut fence_conf = classifier.classify(cfg.fence)?;
    if smooth_radius > 0 {
        fence_conf = smooth_confidence(&fence_conf, smooth_radius);
    }
    let fence = binarize(&fence_conf);
    let (mut total, mut front) = (0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if cfg.roi.is_some_and(|r| !r.contains(x, y)) || fence_conf.get(x, y).is_none() {
                continue;
            }
            total += 1;
            if fence.get(x, y) == DepthLabel::Front.code() {
                front += 1;
            }
        }
    }
    let fraction = if total == 0 { 0.0 } else { front as f64 / total as f64 };

    let next = transition(state, fraction, cfg);
    let range = cfg.active_range(next.extended);
    let schedule = uniform_schedule(range.0, range.1, cfg.planes_per_range)?;
    let volume = build_volume_with(classifier, &schedule, smooth_radius)?;
    Ok(AdaptiveFrame {
        selective: selective_disparity(&volume)?,
        fence,
        fence_fraction: fraction,
        range,
        state: next,
    })
}

fn transition(state: AdaptiveState, fraction: f64, cfg: &AdaptiveConfig) -> AdaptiveState {
    if !state.extended {
        return AdaptiveState {
            extended: fraction >= cfg.tau_on,
            quiet_frames: 0,
        };
    }
    if fraction >= cfg.tau_off {
        return AdaptiveState {
            extended: true,
            quiet_frames: 0,
        };
    }
    let quiet = state.quiet_frames + 1;
    if quiet >= cfg.release_frames {
        AdaptiveState::default()
    } else {
        AdaptiveState {
            extended: true,
            quiet_frames: quiet,
        }
    }
}
