//! Stereo depth from per-plane front/behind classification.
//!
//! A rectified pair is swept over a schedule of fronto-parallel planes. At
//! each plane a classifier reports the confidence that every pixel lies in
//! front of it. The resulting volume yields binary, quantized, selective and
//! continuous disparity.
//!
//! ```
//! use bidepth::{oracle_volume, auc_disparity, uniform_schedule, DisparityMap};
//!
//! let gt = DisparityMap::filled(4, 2, 7.3).unwrap();
//! let vol = oracle_volume(&gt, &uniform_schedule(0.0, 16.0, 17).unwrap());
//! let d = auc_disparity(&vol).unwrap();
//! assert!((d.get(0, 0).unwrap() - 7.3).abs() <= 0.5);
//! ```

pub mod adaptive;
pub mod classifier;
pub mod config;
pub mod depthops;
pub mod error;
pub mod geometry;
pub mod imgio;
pub mod metrics;
pub mod synth;
pub mod timing;

pub use adaptive::{adaptive_step, adaptive_step_with, AdaptiveConfig, AdaptiveFrame, AdaptiveState};
pub use classifier::{
    binarize, classify_plane, oracle_classify, smooth_confidence, ClassifierConfig,
    ConfidenceMap, CostKind, OracleClassifier, PlaneClassifier, ResidualClassifier,
};
pub use depthops::{
    auc_disparity, auc_disparity_with, bin_ground_truth, build_volume, build_volume_with,
    full_disparity, oracle_volume, quantized_disparity, quantized_disparity_with,
    selective_disparity, selective_disparity_with, AucRule, ConfidenceVolume, QuantizeOptions,
    QuantizedDepth, SelectiveDepth,
};
pub use error::{Error, Result};
pub use geometry::{uniform_schedule, warp_right, PlaneSchedule, WarpedImage};
pub use imgio::{DepthLabel, DisparityMap, GrayImage, LabelMap, Mask, StereoPair};
pub use metrics::{bad_pixel_rate, epe, miou, miou_masked, IouCounts, MetricReport};
pub use synth::{brute_force_match, render_pair, Rect, RenderedScene, SceneGenerator, SceneSpec, TextureKind};
