//! Synthetic rectified scenes with exact ground truth, and an exhaustive
//! argmin matcher used as an independent reference.
//!
//! Scenes are stacks of fronto-parallel rectangles with integer disparities,
//! each carrying its own i.i.d. random-dot texture in left-image coordinates.
//! Because textures are functions of surface coordinates, regions visible only
//! in the right view get fresh texture from the same seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::classifier::census::{hamming, CensusImage};
use crate::classifier::{ClassifierConfig, CostKind};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::imgio::{DisparityMap, GrayImage, Mask, StereoPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Footprint in left-image coordinates.
    pub rect: Rect,
    pub disparity: u32,
    pub texture_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextureKind {
    /// Dots take uniform 8-bit gray levels.
    #[default]
    Gray,
    /// Dots are white on black.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Back-to-front.
    pub layers: Vec<Layer>,
    pub background_disparity: u32,
    /// Fraction of texels carrying a dot, in `(0, 1]`.
    pub texture_density: f64,
    pub texture: TextureKind,
    /// Standard deviation of additive Gaussian noise, in intensity units.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Noise-free, fully dense gray texture, no layers.
    pub fn new(width: usize, height: usize, background_disparity: u32, seed: u64) -> Self {
        Self {
            width,
            height,
            layers: Vec::new(),
            background_disparity,
            texture_density: 1.0,
            texture: TextureKind::Gray,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn with_layer(mut self, rect: Rect, disparity: u32, texture_seed: u64) -> Self {
        self.layers.push(Layer {
            rect,
            disparity,
            texture_seed,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("scene", "width and height must be positive"));
        }
        if !(self.texture_density > 0.0 && self.texture_density <= 1.0) {
            return Err(Error::param(
                "density",
                format!("must lie in (0, 1], got {}", self.texture_density),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::param("noise", format!("must be >= 0, got {}", self.noise_sigma)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let r = l.rect;
            if r.width == 0
                || r.height == 0
                || r.x + r.width > self.width
                || r.y + r.height > self.height
            {
                return Err(Error::param(
                    "layer",
                    format!(
                        "layer {i} rectangle {}x{} at ({}, {}) leaves the {}x{} frame",
                        r.width, r.height, r.x, r.y, self.width, self.height
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Parses the scene file format:
    ///
    /// ```text
    /// width = 320
    /// height = 240
    /// background = 4
    /// density = 1.0      # optional, default 1
    /// texture = gray     # gray | binary
    /// noise = 0.0        # optional
    /// seed = 7
    /// layer = 40 30 100 80 20 11   # x y width height disparity texture_seed
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let spec = Self::from_key_values(&mut kv)?;
        kv.finish()?;
        Ok(spec)
    }

    pub fn from_key_values(kv: &mut KeyValues) -> Result<Self> {
        let required = |kv: &mut KeyValues, key: &'static str| -> Result<usize> {
            kv.take_parsed(key)?
                .ok_or_else(|| Error::param("scene", format!("missing key {key:?}")))
        };
        let width = required(kv, "width")?;
        let height = required(kv, "height")?;
        let mut spec = SceneSpec::new(
            width,
            height,
            kv.take_parsed("background")?.unwrap_or(0),
            kv.take_parsed("seed")?.unwrap_or(0),
        );
        if let Some(d) = kv.take_parsed("density")? {
            spec.texture_density = d;
        }
        if let Some(s) = kv.take_parsed("noise")? {
            spec.noise_sigma = s;
        }
        if let Some(t) = kv.take("texture") {
            spec.texture = match t.value.as_str() {
                "gray" => TextureKind::Gray,
                "binary" => TextureKind::Binary,
                other => {
                    return Err(Error::Config {
                        line: t.line,
                        reason: format!("unknown texture {other:?} (gray|binary)"),
                    })
                }
            };
        }
        for e in kv.take_all("layer") {
            let bad = |reason: String| Error::Config { line: e.line, reason };
            let f: Vec<&str> = e.value.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad(format!(
                    "layer needs `x y width height disparity seed`, got {:?}",
                    e.value
                )));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad layer field {s:?}")));
            spec.layers.push(Layer {
                rect: Rect {
                    x: num(f[0])? as usize,
                    y: num(f[1])? as usize,
                    width: num(f[2])? as usize,
                    height: num(f[3])? as usize,
                },
                disparity: u32::try_from(num(f[4])?).map_err(|_| bad("disparity too large".into()))?,
                texture_seed: num(f[5])?,
            });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "background = {}", self.background_disparity);
        let _ = writeln!(s, "density = {}", self.texture_density);
        let _ = writeln!(
            s,
            "texture = {}",
            match self.texture {
                TextureKind::Gray => "gray",
                TextureKind::Binary => "binary",
            }
        );
        let _ = writeln!(s, "noise = {}", self.noise_sigma);
        let _ = writeln!(s, "seed = {}", self.seed);
        for l in &self.layers {
            let r = l.rect;
            let _ = writeln!(
                s,
                "layer = {} {} {} {} {} {}",
                r.x, r.y, r.width, r.height, l.disparity, l.texture_seed
            );
        }
        s
    }

    /// Index into `layers` of the front-most layer covering left pixel `(x, y)`.
    fn left_surface(&self, x: usize, y: usize) -> Option<usize> {
        self.layers.iter().rposition(|l| l.rect.contains(x, y))
    }

    /// Front-most surface seen at right pixel `(x, y)`.
    fn right_surface(&self, x: usize, y: usize) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| l.rect.contains(x + l.disparity as usize, y))
    }

    fn disparity_of(&self, surface: Option<usize>) -> u32 {
        surface.map_or(self.background_disparity, |i| self.layers[i].disparity)
    }

    fn texel(&self, surface: Option<usize>, u: usize, y: usize) -> f32 {
        let surface_seed = surface.map_or(0x5eed_0000_0000_0001, |i| {
            self.layers[i].texture_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (i as u64 + 2)
        });
        let h = mix(mix(mix(self.seed ^ surface_seed) ^ u as u64) ^ ((y as u64) << 32));
        let dot = ((h >> 11) as f64) * (1.0 / (1u64 << 53) as f64);
        if dot >= self.texture_density {
            return 0.0;
        }
        match self.texture {
            TextureKind::Binary => 1.0,
            TextureKind::Gray => level((h & 0xff) as u8),
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 8-bit gray level as stored by an 8-bit PGM.
#[inline]
fn level(k: u8) -> f32 {
    (f64::from(k) / 255.0) as f32
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub pair: StereoPair,
    pub gt: DisparityMap,
    /// True where the left pixel's correspondence is occluded or out of frame.
    pub occlusion: Mask,
}

/// Renders the pair. Intensities are quantized to 8 bits (after noise and
/// clamping), so PGM files reproduce the in-memory images exactly.
pub fn render_pair(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut left = vec![0.0f32; w * h];
    let mut right = vec![0.0f32; w * h];
    let mut gt = vec![0.0f32; w * h];
    let mut occluded = vec![false; w * h];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let s = spec.left_surface(x, y);
            let d = spec.disparity_of(s) as usize;
            left[i] = spec.texel(s, x, y);
            gt[i] = d as f32;
            occluded[i] = x < d || spec.right_surface(x - d, y) != s;

            let rs = spec.right_surface(x, y);
            right[i] = spec.texel(rs, x + spec.disparity_of(rs) as usize, y);
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed ^ 0x6e_6f69_7365));
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::param("noise", e.to_string()))?;
        for v in left.iter_mut().chain(right.iter_mut()) {
            let noisy = (f64::from(*v) + normal.sample(&mut rng)).clamp(0.0, 1.0);
            *v = level((noisy * 255.0).round() as u8);
        }
    }

    Ok(RenderedScene {
        pair: StereoPair::new(GrayImage::from_raw(w, h, left), GrayImage::from_raw(w, h, right))?,
        gt: DisparityMap::from_raw(w, h, gt),
        occlusion: Mask::from_raw(w, h, occluded),
    })
}

/// Random layered scenes for test suites.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    pub width: usize,
    pub height: usize,
    /// Background disparity is drawn from `0..=background_max`.
    pub background_max: u32,
    /// Layer disparities are drawn above the background, up to this value.
    pub max_disparity: u32,
    pub min_layers: usize,
    pub max_layers: usize,
    /// Disparities never assigned to any surface.
    pub excluded: Vec<u32>,
}

impl SceneGenerator {
    pub fn new(width: usize, height: usize, max_disparity: u32) -> Self {
        Self {
            width,
            height,
            background_max: max_disparity / 4,
            max_disparity,
            min_layers: 2,
            max_layers: 5,
            excluded: Vec::new(),
        }
    }

    pub fn generate(&self, seed: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| loop {
            let d = rng.random_range(lo..=hi);
            if !self.excluded.contains(&d) {
                return d;
            }
        };
        let background = draw(&mut rng, 0, self.background_max);
        let count = rng.random_range(self.min_layers..=self.max_layers);
        let mut disparities: Vec<u32> = (0..count)
            .map(|_| draw(&mut rng, background + 1, self.max_disparity))
            .collect();
        disparities.sort_unstable();

        let mut spec = SceneSpec::new(self.width, self.height, background, rng.random());
        for d in disparities {
            let rw = rng.random_range(self.width / 8..=self.width / 3).max(1);
            let rh = rng.random_range(self.height / 6..=self.height / 2).max(1);
            let rect = Rect {
                x: rng.random_range(0..=self.width - rw),
                y: rng.random_range(0..=self.height - rh),
                width: rw,
                height: rh,
            };
            let texture_seed = rng.random();
            spec = spec.with_layer(rect, d, texture_seed);
        }
        spec
    }

    /// One surface per disparity stratum: `[0, max_disparity]` is cut into
    /// `cols * rows` equal strata, the background takes the first and each
    /// other stratum gets a layer inside its own grid tile. Every stratum is
    /// visible, so quantizations aligned with the strata see all bins.
    pub fn generate_tiled(&self, seed: u64, cols: usize, rows: usize) -> SceneSpec {
        assert!(cols >= 1 && rows >= 1 && cols * rows >= 2);
        let strata = cols * rows;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = f64::from(self.max_disparity) / strata as f64;
        let draw = |rng: &mut ChaCha8Rng, k: usize| {
            let lo = (width * k as f64).ceil() as u32;
            let hi = ((width * (k + 1) as f64).ceil() as u32).saturating_sub(1).max(lo);
            let choices: Vec<u32> = (lo..=hi).filter(|d| !self.excluded.contains(d)).collect();
            assert!(!choices.is_empty(), "stratum {k} has no admissible disparity");
            choices[rng.random_range(0..choices.len())]
        };
        let background = draw(&mut rng, 0);
        let mut tiles: Vec<usize> = (0..strata).collect();
        for i in (1..strata).rev() {
            tiles.swap(i, rng.random_range(0..=i));
        }
        let (tw, th) = (self.width / cols, self.height / rows);
        let mut spec = SceneSpec::new(self.width, self.height, background, rng.random());
        for k in 1..strata {
            let d = draw(&mut rng, k);
            let tile = tiles[k];
            let (tx, ty) = ((tile % cols) * tw, (tile / cols) * th);
            let rw = rng.random_range(tw / 2..=tw * 9 / 10).max(1);
            let rh = rng.random_range(th / 2..=th * 9 / 10).max(1);
            let rect = Rect {
                x: tx + rng.random_range(0..=tw - rw),
                y: ty + rng.random_range(0..=th - rh),
                width: rw,
                height: rh,
            };
            let texture_seed = rng.random();
            spec = spec.with_layer(rect, d, texture_seed);
        }
        spec
    }
}

fn aggregated_census(
    lc: &CensusImage,
    rc: &CensusImage,
    x: usize,
    y: usize,
    d: usize,
    agg: usize,
) -> Option<u32> {
    let w = lc.width;
    if x < agg + d || y < agg || x + agg >= w || y + agg >= lc.height {
        return None;
    }
    let mut total = 0;
    for yy in y - agg..=y + agg {
        for xx in x - agg..=x + agg {
            let (li, ri) = (yy * w + xx, yy * w + xx - d);
            if !lc.valid[li] || !rc.valid[ri] {
                return None;
            }
            total += hamming(lc.codes[li], rc.codes[ri]);
        }
    }
    Some(total)
}

fn aggregated_ncc(pair: &StereoPair, x: usize, y: usize, d: usize, agg: usize) -> Option<f64> {
    let (w, h) = pair.dimensions();
    if x < agg + d || y < agg || x + agg >= w || y + agg >= h {
        return None;
    }
    let (l, r) = (pair.left().pixels(), pair.right().pixels());
    let (mut sl, mut sr, mut sll, mut srr, mut slr) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for yy in y - agg..=y + agg {
        for xx in x - agg..=x + agg {
            let a = f64::from(l[yy * w + xx]);
            let b = f64::from(r[yy * w + xx - d]);
            sl += a;
            sr += b;
            sll += a * a;
            srr += b * b;
            slr += a * b;
        }
    }
    let n = ((2 * agg + 1) * (2 * agg + 1)) as f64;
    let var_l = sll - sl * sl / n;
    let var_r = srr - sr * sr / n;
    if var_l <= 1e-10 || var_r <= 1e-10 {
        return None;
    }
    Some(1.0 - (slr - sl * sr / n) / (var_l * var_r).sqrt())
}

/// Winner-takes-all disparity over the integers in `[d_lo, d_hi]`, comparing
/// `L(x, y)` with `R(x - d, y)` directly (no warping). Ties keep the smallest
/// disparity; pixels with no comparable candidate report `d_lo`. Every output
/// lies inside the searched interval, whatever the scene contains.
pub fn brute_force_match(
    pair: &StereoPair,
    d_lo: u32,
    d_hi: u32,
    cfg: &ClassifierConfig,
) -> Result<DisparityMap> {
    cfg.validate()?;
    if d_lo > d_hi {
        return Err(Error::param("range", format!("d_lo {d_lo} exceeds d_hi {d_hi}")));
    }
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
    let census = (cfg.cost == CostKind::Census).then(|| {
        (
            CensusImage::compute(pair.left(), None, cfg.desc_radius),
            CensusImage::compute(pair.right(), None, cfg.desc_radius),
        )
    });

    let mut out = vec![d_lo as f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut best: Option<(f64, u32)> = None;
            for d in d_lo..=d_hi {
                let cost = match &census {
                    Some((lc, rc)) => {
                        aggregated_census(lc, rc, x, y, d as usize, cfg.agg_radius).map(f64::from)
                    }
                    None => aggregated_ncc(pair, x, y, d as usize, cfg.agg_radius),
                };
                if let Some(c) = cost {
                    if best.is_none_or(|(b, _)| c < b) {
                        best = Some((c, d));
                    }
                }
            }
            if let Some((_, d)) = best {
                *o = d as f32;
            }
        }
    });
    Ok(DisparityMap::from_raw(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_layer() -> SceneSpec {
        SceneSpec::new(96, 40, 5, 3).with_layer(
            Rect {
                x: 40,
                y: 10,
                width: 30,
                height: 20,
            },
            20,
            9,
        )
    }

    #[test]
    fn ground_truth_is_sound() {
        let scene = render_pair(&two_layer()).unwrap();
        let (w, h) = scene.pair.dimensions();
        for y in 0..h {
            for x in 0..w {
                if scene.occlusion.get(x, y) {
                    continue;
                }
                let d = scene.gt.get(x, y).unwrap() as usize;
                assert_eq!(scene.pair.left().get(x, y), scene.pair.right().get(x - d, y));
            }
        }
    }

    #[test]
    fn two_layer_occlusion_band() {
        let scene = render_pair(&two_layer()).unwrap();
        let gt = &scene.gt;
        assert!(gt.values().iter().all(|&v| v == 5.0 || v == 20.0));
        assert_eq!(gt.get(45, 15), Some(20.0));
        assert_eq!(gt.get(39, 15), Some(5.0));
        // background pixels in a row through the layer: left frame band x < 5
        // plus the 15 px band left of the layer (x in 25..40)
        let row: Vec<usize> = (0..96).filter(|&x| scene.occlusion.get(x, 15)).collect();
        let expected: Vec<usize> = (0..5).chain(25..40).collect();
        assert_eq!(row, expected);
        // rows outside the layer only lose the frame band
        assert_eq!((0..96).filter(|&x| scene.occlusion.get(x, 2)).count(), 5);
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_pair(&two_layer()).unwrap();
        let b = render_pair(&two_layer()).unwrap();
        assert_eq!(a.pair, b.pair);
        let mut noisy = two_layer();
        noisy.noise_sigma = 0.05;
        let c = render_pair(&noisy).unwrap();
        let d = render_pair(&noisy).unwrap();
        assert_eq!(c.pair, d.pair);
        assert_ne!(c.pair, a.pair);
    }

    #[test]
    fn out_of_bounds_layer_rejected() {
        let spec = SceneSpec::new(10, 10, 0, 0).with_layer(
            Rect {
                x: 5,
                y: 0,
                width: 6,
                height: 2,
            },
            1,
            0,
        );
        assert!(render_pair(&spec).is_err());
    }

    #[test]
    fn binary_texture_and_density() {
        let mut spec = SceneSpec::new(64, 32, 0, 1);
        spec.texture = TextureKind::Binary;
        spec.texture_density = 0.25;
        let scene = render_pair(&spec).unwrap();
        let px = scene.pair.left().pixels();
        assert!(px.iter().all(|&p| p == 0.0 || p == 1.0));
        let on = px.iter().filter(|&&p| p == 1.0).count() as f64 / px.len() as f64;
        assert!((on - 0.25).abs() < 0.05, "{on}");
    }

    #[test]
    fn scene_text_round_trip() {
        let mut spec = two_layer();
        spec.texture = TextureKind::Binary;
        spec.noise_sigma = 0.01;
        spec.texture_density = 0.5;
        assert_eq!(SceneSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(SceneSpec::parse("width = 4\n").is_err());
        assert!(SceneSpec::parse("width = 4\nheight = 4\nlayer = 1 2 3\n").is_err());
        assert!(SceneSpec::parse("width = 4\nheight = 4\ncolour = red\n").is_err());
    }

    #[test]
    fn brute_force_recovers_single_layer() {
        let spec = SceneSpec::new(80, 30, 5, 11);
        let scene = render_pair(&spec).unwrap();
        let cfg = ClassifierConfig::default();
        let d = brute_force_match(&scene.pair, 0, 20, &cfg).unwrap();
        let support = cfg.desc_radius + cfg.agg_radius;
        for y in support..30 - support {
            for x in (5 + support)..80 - support {
                assert_eq!(d.get(x, y), Some(5.0), "({x}, {y})");
            }
        }
        let ncc = ClassifierConfig::with_cost(CostKind::Ncc);
        let d = brute_force_match(&scene.pair, 0, 20, &ncc).unwrap();
        for y in 2..28 {
            for x in 7..78 {
                assert_eq!(d.get(x, y), Some(5.0), "({x}, {y})");
            }
        }
    }

    #[test]
    fn brute_force_stays_inside_range() {
        let scene = render_pair(&SceneSpec::new(80, 30, 5, 11)).unwrap();
        let d = brute_force_match(&scene.pair, 8, 20, &ClassifierConfig::default()).unwrap();
        assert!(d.values().iter().all(|&v| (8.0..=20.0).contains(&v)));
        assert!(brute_force_match(&scene.pair, 9, 8, &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn generator_respects_exclusions() {
        let mut g = SceneGenerator::new(128, 64, 60);
        g.excluded = vec![15, 30, 45];
        for seed in 0..20 {
            let spec = g.generate(seed);
            spec.validate().unwrap();
            assert!(!g.excluded.contains(&spec.background_disparity));
            let ds: Vec<u32> = spec.layers.iter().map(|l| l.disparity).collect();
            assert!(ds.windows(2).all(|w| w[0] <= w[1]));
            assert!(ds.iter().all(|d| *d > spec.background_disparity && *d <= 60));
            assert!(ds.iter().all(|d| !g.excluded.contains(d)));
            assert_eq!(g.generate(seed), spec);
        }
    }
}
