//! Image rotation with bilinear interpolation.
//!
//! Coordinates are 1-based and the centre is `[d1/2 + 1, d2/2 + 1]` with
//! real division. The row formula pairs `sin` with the row offset and `cos`
//! with the column offset, so the two axes are swapped: an angle of zero
//! yields the transposed image on square inputs.

use crate::net::Shape;

pub(crate) struct Sample {
    /// Source pixel `(row, col)`, 1-based, and its weight.
    pub taps: [(usize, usize, f64); 4],
}

/// Interpolation taps for output pixel `(i, j)`, or `None` when the
/// rotated coordinate falls outside the image (the pixel stays zero).
pub(crate) fn sample(d1: usize, d2: usize, theta_deg: f64, i: usize, j: usize) -> Option<Sample> {
    let center = [d1 as f64 / 2.0 + 1.0, d2 as f64 / 2.0 + 1.0];
    let rad = theta_deg * std::f64::consts::PI / 180.0;
    let (s, c) = (rad.sin(), rad.cos());
    let ic = i as f64 - center[0];
    let jc = j as f64 - center[1];
    let ir = (ic * s + jc * c) + center[0];
    let jr = ic * c - jc * s + center[1];
    let (fi, ci, fj, cj) = (ir.floor(), ir.ceil(), jr.floor(), jr.ceil());
    if fi >= 1.0 && ci <= d1 as f64 && fj >= 1.0 && cj <= d2 as f64 {
        let di = ir - fi;
        let dj = jr - fj;
        let (fi, ci, fj, cj) = (fi as usize, ci as usize, fj as usize, cj as usize);
        Some(Sample {
            taps: [
                (fi, fj, (1.0 - di) * (1.0 - dj)),
                (ci, fj, di * (1.0 - dj)),
                (fi, cj, (1.0 - di) * dj),
                (ci, cj, di * dj),
            ],
        })
    } else {
        None
    }
}

/// Rotates every channel. The four taps are summed in a fixed order so the
/// result is reproducible bit for bit.
pub(crate) fn rotate(shape: Shape, theta_deg: f64, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for ch in 0..shape.channels {
        for i in 1..=shape.height {
            for j in 1..=shape.width {
                if let Some(s) = sample(shape.height, shape.width, theta_deg, i, j) {
                    let px = |(r, c, _): (usize, usize, f64)| x[shape.index(ch, r - 1, c - 1)];
                    let [t0, t1, t2, t3] = s.taps;
                    out[shape.index(ch, i - 1, j - 1)] =
                        t0.2 * px(t0) + t1.2 * px(t1) + t2.2 * px(t2) + t3.2 * px(t3);
                }
            }
        }
    }
    out
}

/// Rotation as a sparse linear map, one row per output pixel, duplicate
/// source taps merged.
pub(crate) fn matrix(shape: Shape, theta_deg: f64) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); shape.len()];
    for ch in 0..shape.channels {
        for i in 1..=shape.height {
            for j in 1..=shape.width {
                let Some(s) = sample(shape.height, shape.width, theta_deg, i, j) else {
                    continue;
                };
                let row = &mut rows[shape.index(ch, i - 1, j - 1)];
                for (r, c, w) in s.taps {
                    let src = shape.index(ch, r - 1, c - 1);
                    match row.iter_mut().find(|(k, _)| *k == src) {
                        Some(entry) => entry.1 += w,
                        None => row.push((src, w)),
                    }
                }
                row.retain(|&(_, w)| w != 0.0);
            }
        }
    }
    rows
}
