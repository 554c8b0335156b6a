use rayon::prelude::*;

/// Reusable buffers for [`box_sum`].
#[derive(Default)]
pub struct BoxScratch {
    row_sum: Vec<f64>,
    row_bad: Vec<u32>,
}

/// Square-window sums of `values` over `(2r+1)^2` neighborhoods.
///
/// A pixel's output is valid only when its window lies inside the image and
/// every contributing input is valid; otherwise it is `None` in `out`.
pub fn box_sum(
    values: &[f64],
    valid: &[bool],
    width: usize,
    height: usize,
    r: usize,
    scratch: &mut BoxScratch,
    out: &mut [Option<f64>],
) {
    let n = width * height;
    debug_assert!(values.len() == n && valid.len() == n && out.len() == n);
    scratch.row_sum.resize(n, 0.0);
    scratch.row_bad.resize(n, 0);
    let span = 2 * r + 1;

    // horizontal pass via per-row prefix sums
    scratch
        .row_sum
        .par_chunks_mut(width)
        .zip(scratch.row_bad.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (sum_row, bad_row))| {
            let vals = &values[y * width..(y + 1) * width];
            let ok = &valid[y * width..(y + 1) * width];
            sum_row.fill(0.0);
            bad_row.fill(1);
            if width < span {
                return;
            }
            for x in r..width - r {
                let (mut acc, mut bad) = (0.0f64, 0u32);
                for xx in x - r..=x + r {
                    if ok[xx] {
                        acc += vals[xx];
                    } else {
                        bad += 1;
                    }
                }
                sum_row[x] = acc;
                bad_row[x] = bad;
            }
        });

    let row_sum = &scratch.row_sum;
    let row_bad = &scratch.row_bad;
    out.par_chunks_mut(width).enumerate().for_each(|(y, out_row)| {
        if y < r || y + r >= height {
            out_row.fill(None);
            return;
        }
        for (x, o) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut bad = 0;
            for yy in y - r..y - r + span {
                acc += row_sum[yy * width + x];
                bad += row_bad[yy * width + x];
            }
            *o = (bad == 0).then_some(acc);
        }
    });
}

/// Marks an invalid input to [`box_sum_u32`].
pub const INVALID_U32: u32 = u32::MAX;

const BAD: u64 = 1 << 40;

/// Window sums of non-negative integers, written as `f32`. Windows that leave
/// the image or contain an [`INVALID_U32`] input are `f32::INFINITY`.
pub fn box_sum_u32(
    values: &[u32],
    width: usize,
    height: usize,
    r: usize,
    scratch: &mut Vec<u64>,
    out: &mut [f32],
) {
    let n = width * height;
    debug_assert!(values.len() == n && out.len() == n);
    scratch.resize(n, 0);
    let span = 2 * r + 1;
    let packed = |v: u32| if v == INVALID_U32 { BAD } else { u64::from(v) };

    scratch.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        row.fill(BAD);
        if width < span {
            return;
        }
        let vals = &values[y * width..(y + 1) * width];
        let mut acc: u64 = vals[..span].iter().map(|&v| packed(v)).sum();
        row[r] = acc;
        for x in r + 1..width - r {
            acc = acc + packed(vals[x + r]) - packed(vals[x - r - 1]);
            row[x] = acc;
        }
    });

    let rows = &*scratch;
    out.par_chunks_mut(width).enumerate().for_each(|(y, out_row)| {
        if y < r || y + r >= height {
            out_row.fill(f32::INFINITY);
            return;
        }
        let mut acc = rows[(y - r) * width..(y - r + 1) * width].to_vec();
        for yy in y - r + 1..y - r + span {
            for (a, &v) in acc.iter_mut().zip(&rows[yy * width..(yy + 1) * width]) {
                *a += v;
            }
        }
        for (o, &a) in out_row.iter_mut().zip(&acc) {
            *o = if a < BAD { a as f32 } else { f32::INFINITY };
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(values: &[f64], valid: &[bool], w: usize, h: usize, r: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; w * h];
        for y in r..h.saturating_sub(r) {
            for x in r..w.saturating_sub(r) {
                let mut s = 0.0;
                let mut ok = true;
                for yy in y - r..=y + r {
                    for xx in x - r..=x + r {
                        ok &= valid[yy * w + xx];
                        s += values[yy * w + xx];
                    }
                }
                if ok {
                    out[y * w + x] = Some(s);
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_window_sums() {
        let (w, h) = (11, 8);
        let values: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 13) as f64).collect();
        let valid: Vec<bool> = (0..w * h).map(|i| i % 17 != 3).collect();
        for r in 0..3 {
            let mut out = vec![None; w * h];
            box_sum(&values, &valid, w, h, r, &mut BoxScratch::default(), &mut out);
            assert_eq!(out, naive(&values, &valid, w, h, r));
        }
    }

    #[test]
    fn integer_sums_match_naive() {
        for (w, h) in [(11, 8), (3, 9), (2, 2)] {
            let values: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 13) as f64).collect();
            let valid: Vec<bool> = (0..w * h).map(|i| i % 17 != 3).collect();
            let ints: Vec<u32> = values
                .iter()
                .zip(&valid)
                .map(|(&v, &ok)| if ok { v as u32 } else { INVALID_U32 })
                .collect();
            for r in 0..3 {
                let mut out = vec![0.0f32; w * h];
                box_sum_u32(&ints, w, h, r, &mut Vec::new(), &mut out);
                let expect: Vec<f32> = naive(&values, &valid, w, h, r)
                    .into_iter()
                    .map(|v| v.map_or(f32::INFINITY, |v| v as f32))
                    .collect();
                assert_eq!(out, expect, "{w}x{h} r={r}");
            }
        }
    }
}
