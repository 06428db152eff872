//! Exact Euclidean distance transform (lower envelope of parabolas, one pass per axis).

use crate::imaging::{BinaryMask, ScalarField};

const FAR: f64 = 1e20;

/// Squared distance transform of a sampled 1-D function `f` into `out`.
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so this stops at k = 0 at the latest.
            if s > z[k] {
                break;
            }
            k -= 1;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Distance from every pixel to the nearest 0-valued pixel.
///
/// A mask without any background pixel is measured against a virtual ring of
/// background just outside the image, i.e. the distance to the border.
pub fn distance_transform(mask: &BinaryMask) -> ScalarField {
    let (h, w) = mask.dims();
    let pad = usize::from(mask.count_ones() == h * w);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut grid = vec![0.0f64; ph * pw];
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) {
                grid[(y + pad) * pw + x + pad] = FAR;
            }
        }
    }

    let n = ph.max(pw);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..pw {
        for y in 0..ph {
            f[y] = grid[y * pw + x];
        }
        envelope_1d(&f[..ph], &mut out[..ph], &mut v, &mut z);
        for y in 0..ph {
            grid[y * pw + x] = out[y];
        }
    }
    for y in 0..ph {
        let row = &mut grid[y * pw..(y + 1) * pw];
        f[..pw].copy_from_slice(row);
        envelope_1d(&f[..pw], &mut out[..pw], &mut v, &mut z);
        row.copy_from_slice(&out[..pw]);
    }

    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            data.push(grid[(y + pad) * pw + x + pad].sqrt());
        }
    }
    ScalarField::new(h, w, data).expect("distances are finite")
}
