//! Fixtures shared by the benchmarks.

use bidepth::{render_pair, DisparityMap, SceneGenerator, StereoPair};

/// Rendered layered scene with disparities up to `max_disparity`.
pub fn fixture(width: usize, height: usize, max_disparity: u32, seed: u64) -> (StereoPair, DisparityMap) {
    let spec = SceneGenerator::new(width, height, max_disparity).generate(seed);
    let scene = render_pair(&spec).expect("generated scenes are valid");
    (scene.pair, scene.gt)
}
