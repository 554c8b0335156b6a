use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bidepth::config::KeyValues;
use bidepth::depthops::QuantizeOptions;
use bidepth::imgio::{self, colorize, write_pfm, write_pgm};
use bidepth::synth::SceneGenerator;
use bidepth::timing::{linear_fit, time_build_volume, write_timing_csv};
use bidepth::{
    adaptive_step_with, auc_disparity, bin_ground_truth, binarize, build_volume_with, epe,
    bad_pixel_rate, miou_masked, quantized_disparity_with, render_pair, selective_disparity,
    smooth_confidence, uniform_schedule, AdaptiveConfig, AdaptiveState, ClassifierConfig,
    DepthLabel, DisparityMap, GrayImage, LabelMap, Mask, MetricReport, OracleClassifier,
    PlaneClassifier, PlaneSchedule, ResidualClassifier, SceneSpec, StereoPair,
};

use crate::args::{ClassifierArgs, Command, Input};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Binary {
            input,
            classifier,
            plane,
            output,
        } => {
            let cfg = classifier_config(&classifier, None)?;
            let data = Loaded::read(&input)?;
            let c = data.classifier(&cfg)?;
            let mut conf = c.classify(plane).context("--plane")?;
            if cfg.smooth_radius > 0 {
                conf = smooth_confidence(&conf, cfg.smooth_radius);
            }
            let out = out_dir(&output.out)?;
            write_pgm(&binarize(&conf).to_gray(), out.join("binary.pgm"))?;
            let (w, h) = conf.dimensions();
            let gray = GrayImage::from_fn(w, h, |x, y| conf.get(x, y).unwrap_or(0.0));
            write_pgm(&gray, out.join("confidence.pgm"))?;
            Ok(())
        }
        Command::Quantized {
            input,
            classifier,
            levels,
            count,
            dmax,
            isotonic,
            output,
        } => {
            let levels = match (levels, count) {
                (Some(n), _) => n,
                (None, Some(c)) => c + 1,
                (None, None) => bail!("--levels or --count is required"),
            };
            let schedule = PlaneSchedule::for_levels(dmax, levels).context("--levels")?;
            let cfg = classifier_config(&classifier, None)?;
            let data = Loaded::read(&input)?;
            let vol = build_volume_with(data.classifier(&cfg)?.as_ref(), &schedule, cfg.smooth_radius)?;
            let q = quantized_disparity_with(&vol, dmax, QuantizeOptions { isotonic })?;
            let out = out_dir(&output.out)?;
            write_pgm(&q.bins.to_gray(), out.join("bins.pgm"))?;
            write_pfm(&q.centers, out.join("centers.pfm"))?;
            colorize(&q.centers, 0.0, dmax, None, out.join("centers.ppm"))?;
            Ok(())
        }
        Command::Selective {
            input,
            classifier,
            range: (a, b),
            count,
            output,
        } => {
            let count = count.unwrap_or_else(|| ((b - a).round() as usize + 1).max(2));
            let schedule = uniform_schedule(a, b, count).context("--count")?;
            let cfg = classifier_config(&classifier, None)?;
            let data = Loaded::read(&input)?;
            let vol = build_volume_with(data.classifier(&cfg)?.as_ref(), &schedule, cfg.smooth_radius)?;
            let sel = selective_disparity(&vol)?;
            let out = out_dir(&output.out)?;
            write_pfm(&sel.disparity, out.join("disparity.pfm"))?;
            write_pgm(&label_image(&sel.labels), out.join("labels.pgm"))?;
            colorize(&sel.disparity, a, b, Some(&sel.labels), out.join("selective.ppm"))?;
            Ok(())
        }
        Command::Full {
            input,
            classifier,
            dmax,
            count,
            output,
        } => {
            let count = count.unwrap_or_else(|| (dmax.round() as usize + 1).max(2));
            let schedule = uniform_schedule(0.0, dmax, count).context("--count")?;
            let cfg = classifier_config(&classifier, None)?;
            let data = Loaded::read(&input)?;
            let vol = build_volume_with(data.classifier(&cfg)?.as_ref(), &schedule, cfg.smooth_radius)?;
            let d = auc_disparity(&vol)?;
            let out = out_dir(&output.out)?;
            write_pfm(&d, out.join("disparity.pfm"))?;
            colorize(&d, 0.0, dmax, None, out.join("disparity.ppm"))?;
            Ok(())
        }
        Command::Adaptive {
            sequence,
            classifier,
            range: (a, b),
            fence,
            count,
            oracle,
            output,
        } => {
            let mut acfg = AdaptiveConfig::new(a, b, fence, count);
            let cfg = classifier_config(&classifier, Some(&mut acfg))?;
            acfg.validate()?;
            let frames = read_sequence(&sequence)?;
            let out = out_dir(&output.out)?;
            let mut log = String::from("frame,fence_fraction,extended,d_lo,d_hi\n");
            let mut state = AdaptiveState::default();
            for (k, frame) in frames.iter().enumerate() {
                let input = Input {
                    left: Some(frame.left.clone()),
                    right: Some(frame.right.clone()),
                    gt: frame.gt.clone(),
                    oracle,
                };
                if oracle && frame.gt.is_none() {
                    bail!("--sequence: frame {k} has no ground truth for --oracle");
                }
                let data = Loaded::read(&input).with_context(|| format!("frame {k}"))?;
                let result = adaptive_step_with(state, data.classifier(&cfg)?.as_ref(), &acfg, cfg.smooth_radius)
                    .with_context(|| format!("frame {k}"))?;
                state = result.state;
                let stem = format!("frame_{k:04}");
                write_pgm(&label_image(&result.selective.labels), out.join(format!("{stem}_labels.pgm")))?;
                write_pfm(&result.selective.disparity, out.join(format!("{stem}_disparity.pfm")))?;
                write_pgm(&result.fence.to_gray(), out.join(format!("{stem}_fence.pgm")))?;
                log.push_str(&format!(
                    "{k},{:.6},{},{},{}\n",
                    result.fence_fraction,
                    u8::from(state.extended),
                    result.range.0,
                    result.range.1
                ));
            }
            write_text(&out.join("adaptive.csv"), &log)
        }
        Command::Synth {
            scene,
            seed,
            width,
            height,
            dmax,
            output,
        } => {
            let spec = match scene {
                Some(path) => {
                    let mut spec = SceneSpec::read(&path).context("--scene")?;
                    if let Some(seed) = seed {
                        spec.seed = seed;
                    }
                    spec
                }
                None => SceneGenerator::new(width, height, dmax).generate(seed.unwrap_or(0)),
            };
            let scene = render_pair(&spec)?;
            let out = out_dir(&output.out)?;
            write_pgm(scene.pair.left(), out.join("left.pgm"))?;
            write_pgm(scene.pair.right(), out.join("right.pgm"))?;
            write_pfm(&scene.gt, out.join("gt.pfm"))?;
            write_pgm(&scene.occlusion.to_gray(), out.join("occlusion.pgm"))?;
            write_text(&out.join("scene.txt"), &spec.to_text())
        }
        Command::Bench {
            left,
            right,
            classifier,
            counts,
            repeats,
            dmax,
            seed,
            output,
        } => {
            if counts.is_empty() || counts.contains(&0) {
                bail!("--counts: plane counts must be positive");
            }
            let cfg = classifier_config(&classifier, None)?;
            let pair = match (left, right) {
                (Some(l), Some(r)) => read_pair(&l, &r)?,
                _ => render_pair(&SceneGenerator::new(320, 240, 48).generate(seed))?.pair,
            };
            let rows = time_build_volume(&pair, &cfg, dmax, &counts, repeats).context("--repeats")?;
            let out = out_dir(&output.out)?;
            let path = out.join("bench.csv");
            let mut buf = Vec::new();
            write_timing_csv(&rows, &mut buf)?;
            fs::write(&path, buf).with_context(|| path.display().to_string())?;
            let mut stdout = std::io::stdout().lock();
            for r in &rows {
                writeln!(stdout, "{:>4} planes  {:>10.3} ms  (sd {:.3})", r.planes, r.mean_ms, r.std_ms)?;
            }
            if rows.len() >= 2 {
                let xs: Vec<f64> = rows.iter().map(|r| r.planes as f64).collect();
                let ys: Vec<f64> = rows.iter().map(|r| r.mean_ms).collect();
                if let Ok(fit) = linear_fit(&xs, &ys) {
                    writeln!(
                        stdout,
                        "fit: {:.3} ms/plane + {:.3} ms, R^2 = {:.4}",
                        fit.slope, fit.intercept, fit.r_squared
                    )?;
                }
            }
            Ok(())
        }
        Command::Eval {
            pred,
            gt,
            occlusion,
            levels,
            dmax,
            threshold,
            output,
        } => {
            let pred = imgio::read_pfm(&pred).context("--pred")?;
            let gt = imgio::read_pfm(&gt).context("--gt")?;
            let mask = match occlusion {
                Some(path) => {
                    let occ = Mask::from_gray(&imgio::read_pgm(&path).context("--occlusion")?);
                    if occ.dimensions() != gt.dimensions() {
                        bail!("--occlusion: size differs from --gt");
                    }
                    Some(occ.not())
                }
                None => None,
            };
            let report = evaluate(&pred, &gt, mask.as_ref(), levels, dmax, threshold)?;
            let out = out_dir(&output.out)?;
            write_text(
                &out.join("metrics.csv"),
                &format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row()),
            )?;
            print!("{report}");
            Ok(())
        }
    }
}

fn evaluate(
    pred: &DisparityMap,
    gt: &DisparityMap,
    mask: Option<&Mask>,
    levels: Option<usize>,
    dmax: f64,
    threshold: f64,
) -> Result<MetricReport> {
    if pred.dimensions() != gt.dimensions() {
        bail!(
            "--pred is {}x{} but --gt is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        );
    }
    let mut selected = pred.valid_mask().and(&gt.valid_mask())?;
    if let Some(m) = mask {
        selected = selected.and(m)?;
    }
    let mut report = MetricReport {
        valid_pixels: selected.count(),
        ..MetricReport::default()
    };
    if report.valid_pixels == 0 {
        bail!("no pixels are valid in both --pred and --gt");
    }
    report.epe = Some(epe(pred, gt, Some(&selected))?);
    report.bad_pixel_rate = Some(bad_pixel_rate(pred, gt, Some(&selected), threshold).context("--threshold")?);
    if let Some(levels) = levels {
        let schedule = PlaneSchedule::for_levels(dmax, levels).context("--levels")?;
        let (pl, _) = bin_ground_truth(pred, &schedule);
        let (gl, _) = bin_ground_truth(gt, &schedule);
        let (score, per_class) = miou_masked(&pl, &gl, levels, Some(&selected))?;
        report.miou = Some(score);
        report.miou_global = Some(score);
        report.per_class_iou = per_class;
    }
    Ok(report)
}

/// BEHIND black, IN_RANGE mid gray, FRONT white.
fn label_image(labels: &LabelMap) -> GrayImage {
    GrayImage::from_fn(labels.width(), labels.height(), |x, y| {
        match DepthLabel::from_code(labels.get(x, y)) {
            Some(DepthLabel::Front) => 1.0,
            Some(DepthLabel::InRange) => 0.5,
            _ => 0.0,
        }
    })
}

fn classifier_config(args: &ClassifierArgs, adaptive: Option<&mut AdaptiveConfig>) -> Result<ClassifierConfig> {
    let mut cfg = ClassifierConfig::default();
    if let Some(path) = &args.config {
        let ctx = || format!("--config {}", path.display());
        let mut kv = KeyValues::read(path).with_context(ctx)?;
        cfg.apply(&mut kv).with_context(ctx)?;
        if let Some(a) = adaptive {
            a.apply(&mut kv).with_context(ctx)?;
        }
        kv.finish().with_context(ctx)?;
    }
    if let Some(cost) = args.cost {
        if cost != cfg.cost {
            cfg.cost = cost;
            cfg.temperature = cost.default_temperature();
        }
    }
    Ok(cfg)
}

/// Inputs for one classification run.
struct Loaded {
    pair: Option<StereoPair>,
    gt: Option<DisparityMap>,
    oracle: bool,
}

impl Loaded {
    fn read(input: &Input) -> Result<Self> {
        let gt = match &input.gt {
            Some(p) => Some(imgio::read_pfm(p).context("--gt")?),
            None => None,
        };
        let pair = match (&input.left, &input.right) {
            (Some(l), Some(r)) => Some(read_pair(l, r)?),
            (None, None) if input.oracle => None,
            (None, _) => bail!("--left is required"),
            (_, None) => bail!("--right is required"),
        };
        if let (Some(p), Some(g)) = (&pair, &gt) {
            if p.dimensions() != g.dimensions() {
                bail!("--gt: size differs from --left");
            }
        }
        Ok(Self {
            pair,
            gt,
            oracle: input.oracle,
        })
    }

    fn classifier(&self, cfg: &ClassifierConfig) -> Result<Box<dyn PlaneClassifier + '_>> {
        if self.oracle {
            let gt = self.gt.as_ref().context("--oracle needs --gt")?;
            return Ok(Box::new(OracleClassifier::new(gt)));
        }
        let pair = self.pair.as_ref().context("--left and --right are required")?;
        Ok(Box::new(ResidualClassifier::new(pair, cfg)?))
    }
}

fn read_pair(left: &Path, right: &Path) -> Result<StereoPair> {
    let l = imgio::read_pgm(left).context("--left")?;
    let r = imgio::read_pgm(right).context("--right")?;
    StereoPair::new(l, r).context("--right: size differs from --left")
}

struct Frame {
    left: PathBuf,
    right: PathBuf,
    gt: Option<PathBuf>,
}

fn read_sequence(path: &Path) -> Result<Vec<Frame>> {
    let text = fs::read_to_string(path).with_context(|| format!("--sequence {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            bail!("--sequence line {}: expected `LEFT RIGHT [GT]`", i + 1);
        }
        frames.push(Frame {
            left: base.join(fields[0]),
            right: base.join(fields[1]),
            gt: fields.get(2).map(|f| base.join(f)),
        });
    }
    if frames.is_empty() {
        bail!("--sequence: no frames listed");
    }
    Ok(frames)
}

fn out_dir(path: &Path) -> Result<&Path> {
    fs::create_dir_all(path).with_context(|| format!("--out {}", path.display()))?;
    Ok(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| path.display().to_string())
}
