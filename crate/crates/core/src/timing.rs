//! Wall-clock timing of volume construction across plane counts.

use std::io::Write;
use std::time::Instant;

use crate::classifier::ClassifierConfig;
use crate::depthops::build_volume;
use crate::error::{Error, Result};
use crate::geometry::uniform_schedule;
use crate::imgio::StereoPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub planes: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub median_ms: f64,
}

/// Times `build_volume` for each plane count with planes spread uniformly
/// over `(0, d_max]`. One untimed warm-up run precedes the measurements.
pub fn time_build_volume(
    pair: &StereoPair,
    cfg: &ClassifierConfig,
    d_max: f64,
    counts: &[usize],
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    if repeats == 0 {
        return Err(Error::param("repeats", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let schedule = uniform_schedule(d_max / count as f64, d_max, count)?;
        build_volume(pair, &schedule, cfg)?;
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let vol = build_volume(pair, &schedule, cfg)?;
            samples.push(start.elapsed().as_secs_f64() * 1e3);
            drop(vol);
        }
        rows.push(summarize(count, &mut samples));
    }
    Ok(rows)
}

fn summarize(planes: usize, samples: &mut [f64]) -> TimingRow {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let median = if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    };
    TimingRow {
        planes,
        mean_ms: mean,
        std_ms: var.sqrt(),
        median_ms: median,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("fit", "need at least two paired samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("fit", "x values are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

pub fn write_timing_csv(rows: &[TimingRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "count,mean_ms,std_ms")?;
    for r in rows {
        writeln!(out, "{},{:.4},{:.4}", r.planes, r.mean_ms, r.std_ms)?;
    }
    Ok(())
}
