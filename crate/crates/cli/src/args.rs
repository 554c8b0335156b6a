use std::path::PathBuf;

use bidepth::CostKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bidepth", version, about = "Stereo depth from per-plane front/behind classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// FRONT/BEHIND mask for a single plane.
    Binary {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Plane disparity in pixels.
        #[arg(long)]
        plane: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Bin index and bin center images from N uniformly placed planes.
    Quantized {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Number of depth levels; uses levels - 1 planes inside (0, dmax).
        #[arg(long, conflicts_with = "count", required_unless_present = "count")]
        levels: Option<usize>,
        /// Number of planes; gives count + 1 levels.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 192.0)]
        dmax: f64,
        /// Enforce non-increasing confidences before binning.
        #[arg(long)]
        isotonic: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Disparity inside a range plus FRONT/BEHIND labels outside it.
    Selective {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long, value_parser = parse_range, value_name = "A:B")]
        range: (f64, f64),
        /// Planes across the range, endpoints included.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Continuous disparity over [0, dmax].
    Full {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long, default_value_t = 192.0)]
        dmax: f64,
        /// Planes over [0, dmax]; defaults to unit spacing.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Near-range selective depth with a fence plane that extends the range.
    Adaptive {
        /// Text file with one `LEFT RIGHT [GT]` line per frame; relative
        /// paths resolve against the file's directory.
        #[arg(long)]
        sequence: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long, value_parser = parse_range, value_name = "A:B")]
        range: (f64, f64),
        #[arg(long)]
        fence: f64,
        /// Planes per active range.
        #[arg(long, default_value_t = 9)]
        count: usize,
        /// Classify with each frame's ground truth.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Render a synthetic scene to PGM/PFM files.
    Synth {
        /// Scene description; a random layered scene is generated when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Generator seed, or the noise seed of a --scene file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        /// Largest disparity of a generated scene.
        #[arg(long, default_value_t = 48)]
        dmax: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Time volume construction across plane counts.
    Bench {
        #[arg(long, requires = "right")]
        left: Option<PathBuf>,
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Comma-separated plane counts.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 192.0)]
        dmax: f64,
        /// Seed of the synthetic fixture used without --left/--right.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Compare a disparity prediction with ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// PGM whose nonzero pixels are excluded, e.g. an occlusion map.
        #[arg(long)]
        occlusion: Option<PathBuf>,
        /// Also score mIOU after binning both maps into this many levels.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value_t = 192.0)]
        dmax: f64,
        #[arg(long, default_value_t = 3.0)]
        threshold: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    /// Left image (PGM).
    #[arg(long, required_unless_present = "oracle")]
    pub left: Option<PathBuf>,
    /// Right image (PGM).
    #[arg(long, required_unless_present = "oracle")]
    pub right: Option<PathBuf>,
    /// Ground-truth disparity (PFM).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Classify with the ground truth instead of the images.
    #[arg(long, requires = "gt")]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    #[arg(long, value_parser = parse_cost)]
    pub cost: Option<CostKind>,
    /// `key = value` overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad lower bound {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad upper bound {b:?}"))?;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
        return Err(format!("need 0 <= A < B, got {a}:{b}"));
    }
    Ok((a, b))
}

fn parse_cost(s: &str) -> Result<CostKind, String> {
    s.parse().map_err(|e: bidepth::Error| e.to_string())
}
